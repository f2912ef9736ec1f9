use biasamp::experiments::config::{NoiseAxis, SpectrumKind};
use biasamp::experiments::table::{fmt_f64, COLUMNS};
use biasamp::experiments::{render_svg, run_sweep, PlotSpec, Scenario, SweepConfig, SweepResult, Table};
use biasamp::fixed_point::SolverSettings;
use biasamp::risk::{rp_joint_risk, rp_separate_risk, Family};
use biasamp::{Group, NoiseAndRegularization, ScalingRegime};
use proptest::prelude::*;

fn small(scenario: Scenario) -> SweepConfig {
    SweepConfig {
        phi: Some(vec![0.5]),
        psi: Some(vec![0.75, 2.0]),
        n: Some(60),
        replicates: Some(3),
        ..SweepConfig::preset(scenario)
    }
}

fn sweep(cfg: &SweepConfig) -> SweepResult {
    run_sweep(&cfg.resolve().unwrap(), &SolverSettings::default()).unwrap()
}

#[test]
fn every_preset_resolves_and_round_trips() {
    for s in Scenario::ALL {
        let p = SweepConfig::preset(s);
        let back = SweepConfig::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(back, p, "{}", s.name());
        if s != Scenario::Custom {
            let r = p.resolve().unwrap();
            assert!(r.grid_len() > 0);
        }
    }
}

#[test]
fn shipped_config_files_resolve() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) == Some("json") {
            SweepConfig::load(&path).unwrap().resolve().unwrap();
            seen += 1;
        }
    }
    assert_eq!(seen, 5);
}

#[test]
fn phase_diagram_default_grid_is_40_by_40() {
    let r = SweepConfig::preset(Scenario::PhaseDiagram).resolve().unwrap();
    assert_eq!((r.phi.len(), r.psi.len(), r.grid_len()), (40, 40, 1600));
    assert!((r.phi[0] - 1e-2).abs() < 1e-15 && (r.phi[39] - 10.0).abs() < 1e-12);
}

#[test]
fn unknown_keys_are_rejected() {
    let e = SweepConfig::from_json(r#"{"scenario": "phase-diagram", "lamda": [1.0]}"#);
    assert!(e.is_err());
}

#[test]
fn invalid_configs_are_rejected() {
    let bad = |cfg: SweepConfig| assert!(cfg.resolve().is_err(), "{cfg:?}");
    let base = SweepConfig::preset(Scenario::IsotropicSweep);
    bad(SweepConfig { scenario: None, ..base.clone() });
    bad(SweepConfig { n: Some(1), ..base.clone() });
    bad(SweepConfig { replicates: Some(1), ..base.clone() });
    bad(SweepConfig { p1: Some(1.0), ..base.clone() });
    bad(SweepConfig { psi: Some(vec![]), ..base.clone() });
    bad(SweepConfig { lambda: Some(vec![-1.0]), ..base.clone() });
    bad(SweepConfig { c: Some(vec![1.0]), ..base.clone() });
    bad(SweepConfig { beta1: Some(1.0), ..base.clone() });
    bad(SweepConfig { a1: Some(-1.0), ..base.clone() });
    // custom has no model defaults
    bad(SweepConfig { scenario: Some(Scenario::Custom), ..Default::default() });
}

#[test]
fn custom_scenario_with_all_fields_resolves() {
    let cfg = SweepConfig::from_json(
        r#"{"scenario": "custom", "spectrum": "power-law", "beta1": 1.5, "beta2": 1.0, "alpha": 0.5,
            "theta_scale": 1.0, "sigma1_sq": 1.0, "c": [0.5, 2.0], "phi": [0.5], "psi": [1.5],
            "lambda": [0.1], "p1": 0.3, "n": 50}"#,
    )
    .unwrap();
    let r = cfg.resolve().unwrap();
    assert_eq!(r.noise, NoiseAxis::Ratio(vec![0.5, 2.0]));
    assert_eq!(r.noise_points(), vec![(Some(0.5), 0.5), (Some(2.0), 2.0)]);
    assert_eq!(cfg.spectrum, Some(SpectrumKind::PowerLaw));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_json_round_trip(
        phi in prop::collection::vec(0.01f64..10.0, 1..5),
        lam in 1e-8f64..1e3,
        p1 in 0.01f64..0.99,
        seed in any::<u64>(),
        reps in 2usize..50,
    ) {
        let cfg = SweepConfig {
            phi: Some(phi),
            lambda: Some(vec![lam]),
            p1: Some(p1),
            base_seed: Some(seed),
            replicates: Some(reps),
            ..SweepConfig::preset(Scenario::RegularizationPath)
        };
        let back = SweepConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.resolve().unwrap(), cfg.resolve().unwrap());
    }
}

#[test]
fn empty_result_gives_header_only_csv() {
    let empty = SweepResult { scenario: Scenario::Custom, family: Family::RandomProjection, rows: vec![] };
    let bytes = Table::from_sweep(&empty).to_csv_bytes().unwrap();
    let text = String::from_utf8(bytes).unwrap();
    assert_eq!(text, format!("{}\n", COLUMNS.join(",")));
}

#[test]
fn single_point_grid_gives_two_lines() {
    let cfg = SweepConfig { psi: Some(vec![2.0]), replicates: Some(0), ..small(Scenario::IsotropicSweep) };
    let text = String::from_utf8(Table::from_sweep(&sweep(&cfg)).to_csv_bytes().unwrap()).unwrap();
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn csv_is_byte_identical_across_runs_and_survives_a_file_round_trip() {
    let cfg = small(Scenario::IsotropicSweep);
    let a = Table::from_sweep(&sweep(&cfg));
    let b = Table::from_sweep(&sweep(&cfg));
    assert_eq!(a.to_csv_bytes().unwrap(), b.to_csv_bytes().unwrap());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    a.write_csv(&path).unwrap();
    assert_eq!(Table::read_csv(&path).unwrap(), a);
}

#[test]
fn changing_the_seed_changes_only_simulation_columns() {
    let cfg = small(Scenario::IsotropicSweep);
    let a = Table::from_sweep(&sweep(&cfg));
    let b = Table::from_sweep(&sweep(&SweepConfig { base_seed: Some(99), ..cfg }));
    assert_eq!(a.column("th_add").unwrap(), b.column("th_add").unwrap());
    assert_ne!(a.column("mc_r1j_mean").unwrap(), b.column("mc_r1j_mean").unwrap());
}

#[test]
fn theory_cells_match_direct_risk_calls() {
    let cfg = small(Scenario::IsotropicSweep);
    let resolved = cfg.resolve().unwrap();
    let result = sweep(&cfg);
    let t = Table::from_sweep(&result);
    let st = SolverSettings::default();
    for (i, row) in result.rows.iter().enumerate() {
        let s = resolved.build_spectrum(row.d).unwrap();
        let nz = NoiseAndRegularization::uniform(row.sigma1_sq, row.sigma2_sq, row.lambda).unwrap();
        let r = ScalingRegime::new(resolved.p1, row.phi_realized, row.psi_realized).unwrap();
        let r1j = rp_joint_risk(&s, &r, &nz, Group::One, &st).unwrap().total;
        let r2s = rp_separate_risk(&s, &r, &nz, Group::Two, &st).unwrap().total;
        assert_eq!(t.column("th_r1j").unwrap()[i], Some(r1j));
        assert_eq!(t.column("th_r2s").unwrap()[i], Some(r2s));
        assert_eq!(t.text_column("th_r1j").unwrap()[i], fmt_f64(r1j));
    }
}

#[test]
fn realized_rates_follow_rounding() {
    let cfg = SweepConfig {
        phi: Some(vec![0.333]),
        psi: Some(vec![1.237]),
        n: Some(100),
        replicates: Some(0),
        ..SweepConfig::preset(Scenario::IsotropicSweep)
    };
    let row = &sweep(&cfg).rows[0];
    assert_eq!((row.d, row.m), (33, 124));
    assert_eq!((row.phi_realized, row.psi_realized), (0.33, 1.24));
    assert!(row.flags.is_empty());
}

#[test]
fn rounding_to_zero_is_flagged_not_fatal() {
    let cfg = SweepConfig {
        phi: Some(vec![0.001, 0.5]),
        psi: Some(vec![1.0]),
        n: Some(50),
        replicates: Some(0),
        ..SweepConfig::preset(Scenario::IsotropicSweep)
    };
    let result = sweep(&cfg);
    assert_eq!(result.flagged().count(), 1);
    assert!(result.rows[0].flags[0].starts_with("size error"));
    let t = Table::from_sweep(&result);
    assert_eq!(t.text_column("th_add").unwrap()[0], "");
    assert!(!t.text_column("flags").unwrap()[0].is_empty());
}

#[test]
fn columns_are_the_same_for_every_scenario() {
    for s in [Scenario::IsotropicSweep, Scenario::DiatomicMinority, Scenario::RegularizationPath] {
        let cfg = SweepConfig { lambda: Some(vec![0.1]), replicates: Some(0), ..small(s) };
        let t = Table::from_sweep(&sweep(&cfg));
        assert_eq!(t.header, COLUMNS);
        assert!(t.text_column("scenario").unwrap().iter().all(|x| *x == s.name()));
    }
    let pl = SweepConfig { n: Some(200), ..SweepConfig::preset(Scenario::PowerLawNoiseRatio) };
    let t = Table::from_sweep(&sweep(&pl));
    assert_eq!(t.header, COLUMNS);
    assert_eq!(t.rows.len(), 8);
    assert_eq!(t.column("c").unwrap()[0], Some(0.1));
}

#[test]
fn classical_family_ignores_psi() {
    let cfg = SweepConfig {
        family: Some(Family::Classical),
        psi: None,
        replicates: Some(0),
        lambda: Some(vec![0.1]),
        ..small(Scenario::IsotropicSweep)
    };
    let c = cfg.resolve().unwrap();
    // preset ψ list is kept but does not change the theory columns
    let t = Table::from_sweep(&sweep(&cfg));
    let add = t.column("th_add").unwrap();
    assert!(c.psi.len() > 1);
    assert!(add.windows(2).all(|w| w[0] == w[1]));
}

fn toy_table() -> Table {
    let header: Vec<String> = ["x", "th_add", "mc_add", "mc_r1j_mean", "mc_r1j_std", "mc_replicates", "g"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows = vec![
        vec!["1", "1.5", "1.4", "2", "0.4", "4", "a"],
        vec!["2", "0.5", "", "3", "0.4", "4", "a"],
        vec!["3", "", "", "4", "0.4", "4", "b"],
    ]
    .into_iter()
    .map(|r| r.into_iter().map(str::to_string).collect())
    .collect();
    Table { header, rows }
}

#[test]
fn one_series_with_two_points_is_one_polyline() {
    let spec = PlotSpec::new("x", &["th_add"]);
    let svg = render_svg(&toy_table(), &spec).unwrap();
    assert!(svg.starts_with("<?xml"));
    assert!(svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("<polyline").count(), 1);
    let poly = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
    let pts = poly.split("points=\"").nth(1).unwrap().trim_end_matches("\"/>");
    assert_eq!(pts.split(' ').count(), 2);
    // theory is dashed
    assert!(poly.contains("stroke-dasharray"));
}

#[test]
fn add_series_get_a_reference_line() {
    let t = toy_table();
    let with = render_svg(&t, &PlotSpec::new("x", &["th_add"])).unwrap();
    let without = render_svg(&t, &PlotSpec::new("x", &["mc_r1j_mean"])).unwrap();
    assert!(with.contains(r#"stroke-dasharray="6,4""#));
    assert!(!without.contains(r#"stroke-dasharray="6,4""#));
}

#[test]
fn mean_series_get_standard_error_bars() {
    let svg = render_svg(&toy_table(), &PlotSpec::new("x", &["mc_r1j_mean"])).unwrap();
    let poly = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
    assert!(!poly.contains("stroke-dasharray"));
    // three vertical bars plus axis ticks; bars have equal x endpoints and a colored stroke
    let bars = svg.lines().filter(|l| l.starts_with("<line") && l.contains("stroke=\"#1f77b4\"/>")).count();
    assert_eq!(bars, 3);
}

#[test]
fn group_by_splits_lines() {
    let spec = PlotSpec { group_by: Some("g".into()), ..PlotSpec::new("x", &["mc_r1j_mean"]) };
    let svg = render_svg(&toy_table(), &spec).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert!(svg.contains("mc_r1j_mean (g=b)"));
}

#[test]
fn plot_errors() {
    let t = toy_table();
    assert!(render_svg(&t, &PlotSpec::new("x", &[])).is_err());
    assert!(render_svg(&t, &PlotSpec::new("x", &["nope"])).is_err());
    assert!(render_svg(&t, &PlotSpec::new("nope", &["th_add"])).is_err());
    // log axis drops the non-positive point; nothing left for mc_add at x <= 0
    let empty = Table { header: t.header.clone(), rows: vec![] };
    assert!(render_svg(&empty, &PlotSpec::new("x", &["th_add"])).is_err());
}

#[test]
fn scenario_plots_render_from_a_real_sweep() {
    let cfg = small(Scenario::IsotropicSweep);
    let t = Table::from_sweep(&sweep(&cfg));
    let svg = render_svg(&t, &PlotSpec::for_scenario(Scenario::IsotropicSweep)).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
}
