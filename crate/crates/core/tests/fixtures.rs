use termdp_core::fixtures::{find_fixture, registry};
use termdp_core::io::{parse_problem_str, problem_to_json};
use termdp_core::{Init, SolveRequest, SolverRegistry};

#[test]
fn every_registered_fixture_passes() {
    for f in registry() {
        let rep = f.run().unwrap();
        assert!(rep.passed(), "{rep}");
        assert_eq!(rep.name, f.name());
    }
}

#[test]
fn fixture_problems_survive_json() {
    for f in registry() {
        if let Some(p) = f.problem() {
            let back = parse_problem_str(&problem_to_json(&p).unwrap()).unwrap();
            assert_eq!(back, p, "{}", f.name());
        }
    }
}

#[test]
fn solvers_agree_on_gridworld_fixture_file() {
    let p = find_fixture("min-time").unwrap().problem().unwrap();
    let reg = SolverRegistry::builtin();
    let vi = reg.get("mm-vi").unwrap().solve(&p, &SolveRequest::default()).unwrap();
    let from_inf = reg
        .get("mm-vi")
        .unwrap()
        .solve(&p, &SolveRequest { init: Init::InfOutside, ..Default::default() })
        .unwrap();
    assert!(vi.converged && from_inf.converged);
    assert_eq!(vi.value, from_inf.value);
}

#[test]
fn unknown_fixture_lists_the_known_ones() {
    let msg = find_fixture("nope").err().unwrap().to_string();
    assert!(msg.contains("example1") && msg.contains("tube"), "{msg}");
}
