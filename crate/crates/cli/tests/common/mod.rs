//! Helpers for driving the binary on generated credit-format tables.

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use beliefcal::synthetic::credit_like;
use serde_json::Value;

pub const HEADER: [&str; 25] = [
    "ID",
    "LIMIT_BAL",
    "SEX",
    "EDUCATION",
    "MARRIAGE",
    "AGE",
    "PAY_0",
    "PAY_2",
    "PAY_3",
    "PAY_4",
    "PAY_5",
    "PAY_6",
    "BILL_AMT1",
    "BILL_AMT2",
    "BILL_AMT3",
    "BILL_AMT4",
    "BILL_AMT5",
    "BILL_AMT6",
    "PAY_AMT1",
    "PAY_AMT2",
    "PAY_AMT3",
    "PAY_AMT4",
    "PAY_AMT5",
    "PAY_AMT6",
    "default.payment.next.month",
];

/// Table with the public credit-default column layout; feature values come
/// from the seeded generator, label 1 marks a default.
pub fn write_credit_csv(path: &Path, n: usize, seed: u64) {
    let ds = credit_like(n, 23, seed);
    let mut w = csv::Writer::from_path(path).unwrap();
    w.write_record(HEADER).unwrap();
    for i in 0..n {
        let mut rec = vec![(i + 1).to_string()];
        for j in 0..23 {
            let scale = 1.0 + j as f64;
            rec.push(format!("{:.4}", 50.0 + scale * ds.x[(i, j)]));
        }
        rec.push(if ds.y[i] > 0.0 { "0" } else { "1" }.to_string());
        w.write_record(&rec).unwrap();
    }
    w.flush().unwrap();
}

pub fn shipped_config(name: &str) -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Write `config` into `dir` with its data and output paths redirected.
pub fn write_config(dir: &Path, name: &str, mut config: Value, data: &Path, out: &str) -> PathBuf {
    config["data"] = Value::String(data.to_string_lossy().into_owned());
    config["output_dir"] = Value::String(out.into());
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    path
}

pub fn beliefcal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_beliefcal"))
        .args(args)
        .env_remove("BELIEFCAL_OUT_DIR")
        .output()
        .unwrap()
}

pub fn stderr_line(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).trim_end().to_string()
}

pub fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}
