//! Helpers shared by the integration suites.

#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

pub fn sess_command() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sess"))
}

pub fn run_sess(args: &[&str]) -> Output {
    sess_command()
        .args(args)
        .output()
        .expect("sess binary runs")
}

pub fn assert_success(output: &Output) {
    assert!(
        output.status.success(),
        "sess failed ({:?}):\n{}",
        output.status.code(),
        String::from_utf8_lossy(&output.stderr)
    );
}

pub fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("process not killed by signal")
}

pub fn write_file(path: &Path, contents: &str) {
    std::fs::write(path, contents).expect("fixture write");
}

/// A small pool with hand-written texts; ids q0..q7.
pub const POOL_JSONL: &str = r#"{"id": "q0", "text": "how many apples are left after eating three of seven", "answer": "4"}
{"id": "q1", "text": "what is twelve times twelve", "answer": "144"}
{"id": "q2", "text": "apples in a basket of seven after three are eaten", "answer": "4"}
{"id": "q3", "text": "area of a right triangle with legs three and four", "answer": "6"}
{"id": "q4", "text": "the next prime number after seven", "answer": "11"}
{"id": "q5", "text": "perimeter of a triangle with sides three four five", "answer": "12"}
{"id": "q6", "text": "twelve squared minus four", "answer": "140"}
{"id": "q7", "text": "sum of the first seven primes", "answer": "58"}
"#;

/// Embeddings for q0..q7: three rough clusters in 4 dimensions.
pub const EMBEDDINGS_JSONL: &str = r#"{"id": "q0", "vector": [0.9, 0.1, 0.0, 0.1]}
{"id": "q1", "vector": [0.1, 0.9, 0.1, 0.0]}
{"id": "q2", "vector": [0.8, 0.2, 0.1, 0.0]}
{"id": "q3", "vector": [0.0, 0.1, 0.9, 0.2]}
{"id": "q4", "vector": [0.2, 0.7, 0.0, 0.2]}
{"id": "q5", "vector": [0.1, 0.0, 0.8, 0.3]}
{"id": "q6", "vector": [0.2, 0.8, 0.2, 0.1]}
{"id": "q7", "vector": [0.3, 0.6, 0.1, 0.3]}
"#;

/// Length-normalized log-likelihood confidences for q0..q7.
pub const CONFIDENCES_JSONL: &str = r#"{"id": "q0", "raw": -0.8, "source": "loglik"}
{"id": "q1", "raw": -0.2, "source": "loglik"}
{"id": "q2", "raw": -1.1, "source": "loglik"}
{"id": "q3", "raw": -2.4, "source": "loglik"}
{"id": "q4", "raw": -0.5, "source": "loglik"}
{"id": "q5", "raw": -1.9, "source": "loglik"}
{"id": "q6", "raw": -0.3, "source": "loglik"}
{"id": "q7", "raw": -1.5, "source": "loglik"}
"#;
