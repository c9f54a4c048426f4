use rulemine::baselines::{kkt_violation, LassoProblem};
use rulemine::othello::{generate_games, FeatureVector, N_FEATURES};

fn data(games: usize, seed: u64) -> (Vec<FeatureVector>, Vec<f64>) {
    let fs: Vec<FeatureVector> = generate_games(games, seed).iter().flat_map(|g| g.features().unwrap()).collect();
    // Sparse linear target plus a deterministic wobble.
    let y = fs
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let lin = 1.5 * f.get(10) as u8 as f64 - 0.8 * f.get(200) as u8 as f64 + 0.3 * f.get(77) as u8 as f64;
            lin + 0.1 * ((i as f64) * 0.7).sin()
        })
        .collect();
    (fs, y)
}

/// max_j |(1/n) Σ_i x_ij y_i|, computed row by row.
fn direct_lambda_max(fs: &[FeatureVector], y: &[f64], center: bool) -> f64 {
    let n = fs.len() as f64;
    let ybar = y.iter().sum::<f64>() / n;
    (0..N_FEATURES)
        .map(|j| {
            let s: f64 = fs.iter().zip(y).filter(|(f, _)| f.get(j)).map(|(_, &v)| if center { v - ybar } else { v }).sum();
            (s / n).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn kkt_holds_along_the_path() {
    let (fs, y) = data(60, 4);
    for intercept in [false, true] {
        let p = LassoProblem::<f64>::new(&fs, intercept).unwrap();
        let (b, ybar) = p.correlations(&fs, &y).unwrap();
        let lmax = p.lambda_max(&b);
        let mut warm: Option<Vec<f64>> = None;
        for k in 1..=8 {
            let lambda = lmax * 0.5f64.powi(k);
            let m = p.fit(&b, ybar, lambda, warm.as_deref()).unwrap();
            assert!(m.converged);
            let v = kkt_violation(&m, &fs, &y);
            assert!(v <= 1e-4, "intercept={intercept} lambda={lambda}: violation {v}");
            warm = Some(m.weights.clone());
        }
    }
}

#[test]
fn zero_model_at_lambda_max() {
    let (fs, y) = data(40, 9);
    for intercept in [false, true] {
        let p = LassoProblem::<f64>::new(&fs, intercept).unwrap();
        let (b, ybar) = p.correlations(&fs, &y).unwrap();
        let direct = direct_lambda_max(&fs, &y, intercept);
        assert!((p.lambda_max(&b) - direct).abs() < 1e-9);
        // Both computations agree to rounding; test at the larger so the
        // boundary case is at or above the exact maximum either way.
        let lmax = direct.max(p.lambda_max(&b));
        for scale in [1.0, 1.5] {
            let m = p.fit(&b, ybar, lmax * scale, None).unwrap();
            assert!(m.weights.iter().all(|&w| w == 0.0), "intercept={intercept} scale={scale}");
            if intercept {
                assert!((m.intercept - ybar).abs() < 1e-12);
            }
        }
        let m = p.fit(&b, ybar, direct * 0.9, None).unwrap();
        assert!(m.weights.iter().any(|&w| w != 0.0));
    }
}

#[test]
fn recovers_sparse_support_at_small_lambda() {
    let (fs, y) = data(60, 4);
    let p = LassoProblem::<f64>::new(&fs, true).unwrap();
    let (b, ybar) = p.correlations(&fs, &y).unwrap();
    let m = p.fit(&b, ybar, 0.01, None).unwrap();
    let mut top: Vec<usize> = (0..N_FEATURES).collect();
    top.sort_by(|&a, &c| m.weights[c].abs().total_cmp(&m.weights[a].abs()));
    let mut head = top[..3].to_vec();
    head.sort();
    assert_eq!(head, vec![10, 77, 200]);
}

#[test]
fn rejects_bad_input() {
    let (fs, y) = data(2, 1);
    assert!(LassoProblem::<f64>::new(&fs[..1], true).is_err());
    let p = LassoProblem::<f64>::new(&fs, true).unwrap();
    assert!(p.correlations(&fs, &y[1..]).is_err());
    let mut bad = y.clone();
    bad[0] = f64::NAN;
    assert!(p.correlations(&fs, &bad).is_err());
    let (b, ybar) = p.correlations(&fs, &y).unwrap();
    assert!(p.fit(&b, ybar, -1.0, None).is_err());
}
