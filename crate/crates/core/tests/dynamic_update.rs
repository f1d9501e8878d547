mod checks;

#[test]
fn reroute_applies_to_running_and_new_cases() {
    checks::dynamic::reroute_applies_to_running_and_new_cases().unwrap();
}
