use tosca::report::{from_json, plot_svg, sweep_csv, to_csv, to_json, SweepCell};
use tosca::ReportError;
use tosca_core::data::SplitPlan;
use tosca_core::engine::StageReport;
use tosca_core::{Method, ScenarioConfig, ScenarioReport};

fn report(method: Method, accs: &[f64]) -> ScenarioReport {
    let stages: Vec<StageReport> = accs
        .iter()
        .enumerate()
        .map(|(i, &a)| StageReport {
            index: i + 1,
            accuracy: a,
            selection_accuracy: Some(a),
            classes_seen: 5 * (i + 1),
            params_added: 100,
        })
        .collect();
    ScenarioReport {
        method,
        seed: 1993,
        rng: "xoshiro256++/splitmix64".into(),
        config: ScenarioConfig::default(),
        splits: SplitPlan { stages: vec![vec![0]; accs.len()], seed: 1993 },
        average_accuracy: ScenarioReport::average_of(&stages),
        stages,
        selection_accuracy: None,
        params_per_task: 100.0,
        sparsity_ratio: None,
        orthogonality: None,
        feature_drift: vec![],
        wall_time_s: 0.5,
    }
}

#[test]
fn json_has_required_keys_in_stable_order() {
    let r = report(Method::Tosca, &[100.0, 50.0]);
    let json = to_json(&r).unwrap();
    assert_eq!(to_json(&r).unwrap(), json);
    let value: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(value["A_bar"], 75.0);
    assert_eq!(value["method"], "tosca");
    assert_eq!(value["stages"][1]["A_b"], 50.0);
    assert_eq!(value["stages"][0]["index"], 1);
    for key in ["seed", "config", "params_per_task", "wall_time_s", "selection_accuracy"] {
        assert!(value.get(key).is_some(), "{key}");
    }
    assert!(value["stages"][0].get("selection_accuracy").is_some());
    let pos = |k: &str| json.find(&format!("\"{k}\"")).unwrap();
    assert!(pos("method") < pos("seed") && pos("seed") < pos("config") && pos("stages") < pos("A_bar"));
    assert_eq!(from_json(&json).unwrap(), r);
}

#[test]
fn csv_has_header_and_one_row_per_stage() {
    let r = report(Method::Joint, &[90.0, 80.0, 70.0]);
    let csv = to_csv(std::slice::from_ref(&r)).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0], "method,seed,stage,classes_seen,A_b,selection_accuracy,params_added");
    assert_eq!(lines[2], "joint,1993,2,10,80.0,80.0,100");
    assert_eq!(to_csv(&[]).unwrap().lines().count(), 1);

    let two = to_csv(&[r.clone(), report(Method::Finetune, &[1.0, 2.0, 3.0])]).unwrap();
    assert_eq!(two.lines().count(), 7);
}

#[test]
fn plot_has_one_polyline_per_report() {
    let reports = [report(Method::Tosca, &[99.0, 95.0, 90.0]), report(Method::Finetune, &[99.0, 60.0, 30.0])];
    let svg = plot_svg(&reports).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert!(svg.contains(">tosca<") && svg.contains(">finetune<"));
    assert_eq!(plot_svg(&reports).unwrap(), svg);
}

#[test]
fn single_stage_plot_uses_markers() {
    let svg = plot_svg(&[report(Method::SimpleCil, &[88.0])]).unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("<polyline").count(), 0);
    assert_eq!(svg.matches("<circle").count(), 1);
}

#[test]
fn plot_rejects_mismatched_or_missing_reports() {
    let err = plot_svg(&[report(Method::Tosca, &[1.0, 2.0]), report(Method::Joint, &[1.0])]).unwrap_err();
    assert!(matches!(err, ReportError::MismatchedStages { expected: 2, found: 1 }));
    assert!(matches!(plot_svg(&[]), Err(ReportError::NoReports)));
}

#[test]
fn sweep_csv_layout() {
    let cells = [
        SweepCell {
            lambda: 0.0,
            rank: 8,
            final_accuracy: 90.0,
            average_accuracy: 95.0,
            sparsity_ratio: Some(0.25),
            orthogonality: None,
        },
        SweepCell {
            lambda: 5e-4,
            rank: 16,
            final_accuracy: 91.0,
            average_accuracy: 96.0,
            sparsity_ratio: Some(0.5),
            orthogonality: Some(0.1),
        },
    ];
    let csv = sweep_csv(&cells).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "lambda,r,A_B,A_bar,sparsity_ratio,orthogonality");
    assert_eq!(lines[1], "0.0,8,90.0,95.0,0.25,");
    assert_eq!(lines[2], "0.0005,16,91.0,96.0,0.5,0.1");
    assert_eq!(sweep_csv(&[]).unwrap().lines().count(), 1);
}
