use pyo3::prelude::*;
use pyo3::types::PyDict;

fn run(code: &std::ffi::CStr) {
    Python::initialize();
    Python::attach(|py| {
        let module = pyo3::wrap_pymodule!(babble::babble)(py);
        let locals = PyDict::new(py);
        locals.set_item("babble", module).unwrap();
        if let Err(e) = py.run(code, Some(&locals), None) {
            e.print(py);
            panic!("python code failed");
        }
    });
}

#[test]
fn functions() {
    run(cr#"
assert abs(babble.compute_motivation(0.5, 0.4) - 0.7) < 1e-12
assert babble.moving_average_reward([1, -1, 1, 1, 1, 1], 5, 6) == 0.6
assert babble.mar_curve([1, -1], 5) == [1.0, 0.0]
assert babble.convergence_time([-1, 1, 1], 2, 1.0) == 3
words = babble.build_vocabulary(["na", "wa", "da", "pa"], 3, 7)
assert len(set(words)) == 3 and words == babble.build_vocabulary(["na", "wa", "da", "pa"], 3, 7)
assert babble.positive_feedback("DOT", "hunger", 0) == ("positive", "arm_wave", "happy_beep_b")
try:
    babble.build_vocabulary(["na"], 2, 0)
    raise AssertionError("expected ValueError")
except ValueError:
    pass
"#);
}

#[test]
fn episodes_and_sessions() {
    run(cr#"
import json
cfg = json.loads(babble.default_config())
cfg["caregiver"] = {"kind": "oracle"}
cfg["seed"] = 42
log = babble.run_episode(json.dumps(cfg))
assert log == babble.run_episode(json.dumps(cfg))
babble.validate_log(log)
assert babble.replays_to_itself(log)
parsed = json.loads(log)
assert all(t["reward"] == 1 for t in parsed["trials"])

s = babble.Session(json.dumps(cfg))
assert s.phase == "idle"
while s.phase != "awaiting_object":
    s.advance()
need = s.expressed_need
obj = {"hunger": "cookie", "thirst": "drink", "curiosity": "teddy_bear"}[need]
events = [json.loads(e) for e in s.advance(obj)]
assert events[-1] == {"type": "evaluated", "object": obj, "reward": 1}
try:
    s.advance("cookie")
    raise AssertionError("expected ValueError")
except ValueError:
    pass
"#);
}

#[test]
fn plan_summary() {
    run(cr#"
import json
summary = json.loads(babble.run_plan('''
n_runs_per_condition = 4
conditions = ["DOT", "NonDOT"]
output_dir = "unused"
'''))
assert [c["condition"] for c in summary["conditions"]] == ["DOT", "NonDOT"]
assert summary["dot_minus_nondot"]["pairs"] == 4
"#);
}
