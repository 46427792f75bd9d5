// Parses experiment files and lists every violation found.

use ons_unlearn::config::RunConfig;

const GOOD: &str = r#"
[stream]
horizon = 400

[deletion]
tau = 200
count = 10

[run]
seeds = 20
"#;

const BAD: &str = r#"
[ons]
beta_grid = [0.5, 1.2]

[deletion]
tau = 5
count = 10
"#;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let good = RunConfig::from_toml_str(GOOD, "good.toml")?;
    let plan = good.validate()?;
    println!("good.toml: T = {}, tau = {}, {} seeds, {} cells", plan.stream.horizon, plan.deletion.tau, plan.seeds.len(), plan.cells.len());

    let bad = RunConfig::from_toml_str(BAD, "bad.toml")?;
    for v in bad.violations() {
        println!("bad.toml: {v}");
    }
    assert!(bad.validate().is_err());

    match RunConfig::from_toml_str("[ons]\ngamma = 2\n", "typo.toml") {
        Err(e) => println!("typo.toml: {e}"),
        Ok(_) => return Err("unknown key accepted".into()),
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
