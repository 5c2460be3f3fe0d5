use ccdist::verify::criterion;

const SEED: u64 = 7;

#[test]
fn acceptance_criteria() {
    let mut failed = Vec::new();
    for id in 1..=13 {
        let report = criterion(id, SEED).expect("criterion id");
        let verdict = if report.passed() { "PASS" } else { "FAIL" };
        println!("criterion {id:>2}: {verdict}  {}  ({:.1} s)", report.title, report.seconds);
        for c in &report.checks {
            let mark = if c.passed { "ok" } else { "FAILED" };
            let note = if c.note.is_empty() { String::new() } else { format!("  [{}]", c.note) };
            println!(
                "    {mark:<6} {}: measured {:.3e}, tolerance {:.1e}, n = {}{note}",
                c.name, c.measured, c.tolerance, c.samples
            );
        }
        if !report.passed() {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
