use std::process::ExitCode;

use lipmix::acceptance::{criteria, run_criterion};

fn main() -> ExitCode {
    let mut failed = Vec::new();
    for (id, _) in criteria() {
        let r = run_criterion(id).unwrap();
        println!("{}", r.line());
        if !r.passed {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
