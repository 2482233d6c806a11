//! A ten-record dataset and scripted outputs of which exactly seven carry
//! the gold answer.

use serde_json::json;

pub struct Rig {
    /// Dataset JSONL.
    pub dataset: String,
    /// `(record id, scripted output)` pairs.
    pub script: Vec<(String, String)>,
    pub designed_correct: usize,
}

pub fn rig() -> Rig {
    // (id, dataset, key, gold, scripted answer)
    let rows: [(&str, &str, Option<&str>, &str, &str); 10] = [
        ("d1", "mydoc", Some("total"), "$12.50", "$12.50"),
        ("d2", "mydoc", Some("page"), "3", "3"),
        ("d3", "mydoc", Some("name"), "Ann Lee", "ann  lee"),
        ("d4", "mydoc", Some("date"), "2021-04-01", "2021-04-02"),
        ("c1", "mychart", None, "2019", "2019"),
        ("c2", "mychart", None, "Blue", "blue"),
        ("c3", "mychart", None, "40%", "45%"),
        ("i1", "myinfographic", None, "Asia", "Asia"),
        ("i2", "myinfographic", None, "7 million", "7 million"),
        ("i3", "myinfographic", None, "Tuesday", "Monday"),
    ];
    let mut dataset = String::new();
    let mut script = Vec::new();
    let mut designed_correct = 0;
    for (id, ds, key, gold, answer) in rows {
        let mut record = json!({"id": id, "dataset": ds, "question": format!("Question {id}?"), "gold": gold});
        if let Some(k) = key {
            record["key"] = json!(k);
            record["context_text"] = json!(format!("Document for {id}."));
        }
        dataset.push_str(&record.to_string());
        dataset.push('\n');
        let answer_key = format!("2_{}", key.unwrap_or("answer"));
        let value = if key == Some("page") {
            answer.to_string()
        } else {
            serde_json::to_string(answer).unwrap()
        };
        let output = format!(
            "{{\"1_reasoning\": {}, {}: {value}}}",
            serde_json::to_string(&format!("Looking at {id}.")).unwrap(),
            serde_json::to_string(&answer_key).unwrap()
        );
        let normalize = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
        if normalize(answer) == normalize(gold) {
            designed_correct += 1;
        }
        script.push((id.to_string(), output));
    }
    Rig {
        dataset,
        script,
        designed_correct,
    }
}
