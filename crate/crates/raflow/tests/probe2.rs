// Temporary measurement probe; deleted before the final commit.

use raflow::presets;

#[test]
#[ignore]
fn dump_scenarios() {
    for (name, s) in [
        ("toy", presets::toy()),
        ("grid_two_flow", presets::grid_two_flow()),
        ("grid_three_flow", presets::grid_three_flow()),
    ] {
        println!("=== {name} ===");
        println!("{}", s.to_toml_string());
    }
}
