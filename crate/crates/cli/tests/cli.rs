use riskroute_cli::{format_number, round12, run, EXIT_FAILURE, EXIT_INPUT, EXIT_USAGE};
use serde_json::Value;

fn fixture(name: &str) -> String {
    format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("riskroute").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn json(text: &str) -> Value {
    serde_json::from_str(text.trim()).unwrap()
}

#[test]
fn number_formatting_caps_significant_digits() {
    assert_eq!(format_number(12.0), "12");
    assert_eq!(format_number(10.0 + 5f64.sqrt()), "12.2360679775");
    assert_eq!(format_number(1.0 / 3.0), "0.333333333333");
    assert_eq!(format_number(-0.0), "0");
    assert_eq!(format_number(2.5e-20), "0.000000000000000000025");
    assert_eq!(round12(round12(std::f64::consts::PI)), round12(std::f64::consts::PI));
}

#[test]
fn golden_fig1_confirms_reversal() {
    let (code, out, _) = call(&["golden", "fig1"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(&lines[..4], ["rho_x 12", "rho_y 12.2360679775", "rho_x_plus_z 22.7320508076", "rho_y_plus_z 22.6457513111"]);
    assert_eq!(lines.last(), Some(&"REVERSAL CONFIRMED"));
}

#[test]
fn golden_fig4_and_allais() {
    let (code, out, _) = call(&["golden", "fig4"]);
    assert_eq!(code, 0);
    assert!(out.contains("rho_iterated 22\n") && out.ends_with("ORDER FLIP CONFIRMED\n"));
    let (code, out, _) = call(&["golden", "allais"]);
    assert_eq!(code, 0);
    assert!(out.contains("mean_lottery_y 87\n"));
}

#[test]
fn eval_inline_and_file() {
    let (code, out, _) = call(&["eval", "--dist", r#"{"type":"constant","value":7}"#, "--risk", "entropic:2"]);
    assert_eq!((code, out.as_str()), (0, "7\n"));
    // N(3, 2^2) under entropic 0.5: 3 + 0.5 * 4 / 2.
    let (code, out, _) = call(&["eval", "--dist", r#"{"type":"normal","mean":3,"std":2}"#, "--risk", "entropic:0.5"]);
    assert_eq!((code, out.as_str()), (0, "4\n"));
    let (code, out, _) =
        call(&["eval", "--dist", r#"{"type":"discrete","support":[0,10],"probs":[0.9,0.1]}"#, "--risk", "avar:0.1"]);
    assert_eq!((code, out.as_str()), (0, "10\n"));
}

#[test]
fn path_and_bruteforce_agree_on_eight_node_fixture() {
    let net = fixture("grid8.json");
    let base = ["--net", net.as_str(), "--from", "n0", "--to", "n7", "--risk", "entropic:0.5"];
    let (c1, a, _) = call(&[&["path"][..], &base].concat());
    let (c2, b, _) = call(&[&["bruteforce-path"][..], &base].concat());
    assert_eq!((c1, c2), (0, 0));
    let (a, b) = (json(&a), json(&b));
    assert_eq!(a["path"], b["path"]);
    assert_eq!(a["weight"], b["value"]);
    assert!(a["path"]["nodes"].as_array().unwrap().len() > 2);
}

#[test]
fn path_rejects_non_additive_measures() {
    let net = fixture("fig1.json");
    let (code, out, err) = call(&["path", "--net", &net, "--from", "s", "--to", "d", "--risk", "mean_stdev:1"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(out.is_empty());
    assert!(err.contains("not additive"), "{err}");
}

#[test]
fn compare_flags_the_paradox() {
    let net = fixture("fig1.json");
    let (code, out, _) =
        call(&["bruteforce-path", "--net", &net, "--from", "s", "--to", "d", "--risk", "mean_stdev:1", "--compare"]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert_eq!(v["paradox"], Value::Bool(true));
    assert_eq!(v["bruteforce"]["path"]["arcs"], serde_json::json!(["y", "z"]));
    assert_eq!(v["arcwise"]["path"]["arcs"], serde_json::json!(["x", "z"]));
    assert_eq!(v["bruteforce"]["value"].as_f64(), Some(22.6457513111));

    let (_, out, _) =
        call(&["bruteforce-path", "--net", &net, "--from", "s", "--to", "d", "--risk", "entropic:1", "--compare"]);
    assert_eq!(json(&out)["paradox"], Value::Bool(false));
}

#[test]
fn equilibrium_on_two_links() {
    let (code, out, _) = call(&["equilibrium", "--net", &fixture("two_link.json"), "--risk", "entropic:1", "--tol", "1e-6"]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert_eq!(v["link_flows"]["l1"].as_f64(), Some(1.0));
    assert_eq!(v["link_flows"]["l2"].as_f64(), Some(1.0));
    assert!(v["relative_gap"].as_f64().unwrap() <= 1e-6);
    assert_eq!(v["path_flows"].as_array().unwrap().len(), 2);
}

#[test]
fn atomic_reports_profile_and_potentials() {
    let (code, out, _) = call(&["atomic", "--net", &fixture("two_link.json"), "--players", "2", "--risk", "entropic:0"]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert_eq!(v["nash"], Value::Bool(true));
    assert_eq!(v["profile"].as_array().unwrap().len(), 2);
    let pots: Vec<f64> = v["potentials"].as_array().unwrap().iter().map(|p| p.as_f64().unwrap()).collect();
    assert!(pots.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn check_suites_meet_expectations() {
    let cases: [(&[&str], bool); 10] = [
        (&["--suite", "axioms", "--count", "100"], true),
        (&["--suite", "additivity", "--count", "200"], true),
        (&["--suite", "additivity", "--count", "200", "--risk", "avar:0.1"], false),
        (&["--suite", "efin"], true),
        (&["--suite", "efin", "--risk", "distortion:power:0.5"], false),
        (&["--suite", "vnm"], true),
        (&["--suite", "vnm", "--risk", "cert:cubic"], false),
        (&["--suite", "rankdep", "--count", "50"], true),
        (&["--suite", "rankdep", "--count", "50", "--risk", "rankdep:identity:power:0.5"], false),
        (&["--suite", "rankdep", "--count", "50", "--risk", "rankdep:exp:1:power:0.5"], false),
    ];
    for (args, expect_empty) in cases {
        let (code, out, err) = call(&[&["check"][..], args].concat());
        assert_eq!(code, 0, "{args:?}: {err}");
        assert_eq!(out.is_empty(), expect_empty, "{args:?}");
        for l in out.lines() {
            let v = json(l);
            for key in ["property", "witness", "lhs", "rhs", "gap"] {
                assert!(v.get(key).is_some(), "{key} missing in {l}");
            }
        }
    }
}

#[test]
fn check_output_is_deterministic() {
    let args = ["check", "--suite", "additivity", "--risk", "mean_stdev:1", "--seed", "7", "--count", "300"];
    let (c1, a, _) = call(&args);
    let (c2, b, _) = call(&args);
    assert_eq!((c1, c2), (0, 0));
    assert!(!a.is_empty());
    assert_eq!(a, b);
    let (_, other, _) = call(&["check", "--suite", "additivity", "--risk", "mean_stdev:1", "--seed", "8", "--count", "300"]);
    assert_ne!(a, other);
}

#[test]
fn check_rejects_wrong_spec_kind() {
    let (code, _, err) = call(&["check", "--suite", "efin", "--risk", "entropic:1"]);
    assert_eq!(code, EXIT_USAGE, "{err}");
    let (code, _, _) = call(&["check", "--suite", "vnm", "--risk", "avar:0.2"]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn error_exit_codes() {
    let (code, _, err) = call(&["eval", "--dist", "/no/such/file.json", "--risk", "entropic:1"]);
    assert_eq!(code, EXIT_INPUT, "{err}");
    let manifest = format!("{}/Cargo.toml", env!("CARGO_MANIFEST_DIR"));
    let (code, _, _) = call(&["path", "--net", &manifest, "--from", "a", "--to", "b", "--risk", "entropic:1"]);
    assert_eq!(code, EXIT_INPUT);
    let (code, _, _) = call(&["eval", "--dist", "{}", "--risk", "nonsense:1"]);
    assert_eq!(code, EXIT_USAGE);
    let (code, _, _) = call(&["frobnicate"]);
    assert_eq!(code, EXIT_USAGE);
    let (code, _, _) = call(&[]);
    assert_eq!(code, EXIT_USAGE);
    let (code, out, _) = call(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("golden"));
}

#[test]
fn equilibrium_iteration_cap_is_a_failure_with_best_iterate() {
    let net = fixture("braess.json");
    let (code, out, err) = call(&["equilibrium", "--net", &net, "--risk", "entropic:0.5", "--max-iter", "1"]);
    assert_eq!(code, EXIT_FAILURE, "{err}");
    assert!(err.contains("above tolerance"));
    assert!(json(&out)["relative_gap"].as_f64().unwrap() > 1e-6);
    // One step already lands on the two-link equilibrium.
    let (code, _, _) = call(&["equilibrium", "--net", &fixture("two_link.json"), "--risk", "entropic:1", "--max-iter", "1"]);
    assert_eq!(code, 0);
}

#[test]
fn braess_equilibrium_matches_closed_form() {
    // Costs 1.125 y on sa and bd, 2.25 on sb and ad, 0.1 on ab. Equal route
    // costs with outer flows t and zig-zag 2 - 2t give t = 2 - 2.15 / 1.125.
    let (code, out, _) = call(&["equilibrium", "--net", &fixture("braess.json"), "--risk", "entropic:0.5"]);
    assert_eq!(code, 0);
    let v = json(&out);
    let t = 2.0 - 2.15 / 1.125;
    let want = [("sa", 2.0 - t), ("bd", 2.0 - t), ("sb", t), ("ad", t), ("ab", 2.0 - 2.0 * t)];
    for (arc, y) in want {
        let got = v["link_flows"][arc].as_f64().unwrap();
        assert!((got - y).abs() < 1e-4, "{arc}: {got} vs {y}");
    }
}
