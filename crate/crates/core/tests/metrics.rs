use mobile_ude::bench::{error_metrics, Window};
use proptest::prelude::*;

/// Straight from the definitions, collecting the windowed samples first.
fn reference(times: &[f64], err: &[f64], w: &Window) -> (f64, f64, f64) {
    let inside: Vec<f64> = times
        .iter()
        .zip(err)
        .filter(|(t, _)| **t >= w.start && **t < w.end)
        .map(|(_, e)| *e)
        .collect();
    let tail: Vec<f64> = times
        .iter()
        .zip(err)
        .filter(|(t, _)| **t >= w.end - w.sse_window && **t >= w.start && **t < w.end)
        .map(|(_, e)| *e)
        .collect();
    let n = inside.len() as f64;
    let rmse = (inside.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
    let mae = inside.iter().map(|e| e.abs()).sum::<f64>() / n;
    let sse = tail.iter().sum::<f64>() / tail.len() as f64;
    (rmse, mae, sse)
}

#[test]
fn constant_error_gives_equal_metrics() {
    let times: Vec<f64> = (0..1000).map(|k| k as f64 * 0.008).collect();
    let err = vec![-0.25; 1000];
    let m = error_metrics(&times, &err, &Window::whole(8.0)).unwrap();
    assert_eq!((m.rmse, m.mae, m.sse), (0.25, 0.25, -0.25));
}

#[test]
fn sinusoid_has_textbook_rmse_and_mae() {
    let n = 100_000;
    let times: Vec<f64> = (0..n).map(|k| k as f64 / n as f64).collect();
    let err: Vec<f64> = times.iter().map(|t| 2.0 * (std::f64::consts::TAU * 5.0 * t).sin()).collect();
    let m = error_metrics(&times, &err, &Window::whole(1.0)).unwrap();
    assert!((m.rmse - 2.0 / 2f64.sqrt()).abs() < 1e-9);
    assert!((m.mae - 4.0 / std::f64::consts::PI).abs() < 1e-6);
    assert!(m.sse.abs() < 1e-9);
}

#[test]
fn empty_window_is_an_error() {
    let times = [0.0, 1.0, 2.0];
    let err = [1.0, 2.0, 3.0];
    let w = Window {
        start: 5.0,
        end: 6.0,
        sse_window: 1.0,
    };
    assert!(error_metrics(&times, &err, &w).is_err());
}

proptest! {
    #[test]
    fn metrics_match_reference(
        err in proptest::collection::vec(-5.0f64..5.0, 10..400),
        start in 0.0f64..0.3,
        span in 0.4f64..1.0,
        tail in 0.05f64..0.4,
    ) {
        let n = err.len();
        let times: Vec<f64> = (0..n).map(|k| k as f64 / n as f64).collect();
        let w = Window { start, end: start + span, sse_window: tail * span };
        let (rmse, mae, sse) = reference(&times, &err, &w);
        match error_metrics(&times, &err, &w) {
            Ok(m) => {
                prop_assert!((m.rmse - rmse).abs() < 1e-12);
                prop_assert!((m.mae - mae).abs() < 1e-12);
                prop_assert!((m.sse - sse).abs() < 1e-12);
                prop_assert!(m.mae <= m.rmse + 1e-12);
                prop_assert!(m.sse.abs() <= err.iter().fold(0.0f64, |a, e| a.max(e.abs())));
            }
            Err(_) => prop_assert!(sse.is_nan() || rmse.is_nan()),
        }
    }
}
