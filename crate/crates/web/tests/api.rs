use formctl_web::{repulsion_profile, simulate, transform, SimulateRequest};

#[test]
fn short_simulation_returns_requested_frames() {
    let req = SimulateRequest {
        duration: Some(1.0),
        frames: Some(10),
        ..SimulateRequest::default()
    };
    let res = simulate(&req).unwrap();
    assert_eq!(res.groups, vec![3, 3, 3]);
    // 1000 steps at stride 100 plus the initial frame
    assert_eq!(res.frames.len(), 11);
    assert!(res.frames.iter().all(|f| f.robots.len() == 9));
    assert!(res.frames.last().unwrap().error[0] < res.frames[0].error[0]);
}

#[test]
fn unknown_preset_and_bad_gain_are_errors() {
    let bad = SimulateRequest {
        preset: Some("nope".into()),
        ..SimulateRequest::default()
    };
    assert!(simulate(&bad).unwrap_err().contains("nope"));
    let bad = SimulateRequest {
        eps1: Some(0.0),
        ..SimulateRequest::default()
    };
    assert!(simulate(&bad).is_err());
}

#[test]
fn request_rejects_unknown_fields() {
    assert!(serde_json::from_str::<SimulateRequest>(r#"{"seed": 1, "speed": 2}"#).is_err());
    let req: SimulateRequest = serde_json::from_str(r#"{"seed": 3, "collision": true}"#).unwrap();
    assert_eq!(req.seed, Some(3));
}

#[test]
fn transform_labels_rows() {
    let t = transform("2, 3").unwrap();
    assert_eq!(t.rows, ["intra 1.1", "intra 2.1", "intra 2.2", "inter 1", "centroid"]);
    assert_eq!(t.matrix.len(), 5);
    assert!(t.matrix[4].iter().all(|&v| (v - 0.2).abs() < 1e-15));
    assert!(transform("3,x").is_err());
    assert!(transform("1,3").is_err());
}

#[test]
fn repulsion_profile_shape() {
    let pts = repulsion_profile(5.0, 2.0, 3.0, 121).unwrap();
    assert_eq!(pts.len(), 121);
    assert_eq!(pts[0], [0.0, 0.0]);
    // ρ·b·exp(−ρ²/c) peaks at ρ = √(c/2) = 1 with value 5/√e
    let (rho, peak) = pts.iter().fold((0.0, 0.0), |acc, p| if p[1] > acc.1 { (p[0], p[1]) } else { acc });
    assert!((rho - 1.0_f64).abs() < 0.04, "{rho}");
    assert!((peak - 5.0 * (-0.5_f64).exp()).abs() < 1e-3);
    // nothing beyond the sensing radius
    assert!(pts.iter().filter(|p| p[0] >= 3.0).all(|p| p[1] == 0.0));
}
