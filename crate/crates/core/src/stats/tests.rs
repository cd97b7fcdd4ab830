use super::*;
use crate::kernel::{growth_rate_factor, h_of_x, GrowthFamily, SolverSettings};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn series_constructor_enforces_invariants() {
    assert!(TimeSeries::new(vec![(0.0, 1.0), (1.0, 2.0)]).is_ok());
    assert_eq!(
        TimeSeries::new(vec![(0.0, 1.0)]).unwrap_err(),
        StatsError::TooShort { n: 1, min: 2 }
    );
    assert_eq!(
        TimeSeries::new(vec![(0.0, 1.0), (0.0, 2.0)]).unwrap_err(),
        StatsError::NonIncreasingTime { index: 1 }
    );
    assert_eq!(
        TimeSeries::new(vec![(1.0, 1.0), (0.5, 2.0)]).unwrap_err(),
        StatsError::NonIncreasingTime { index: 1 }
    );
    assert_eq!(
        TimeSeries::new(vec![(0.0, 1.0), (1.0, 0.0)]).unwrap_err(),
        StatsError::NonPositiveQ { index: 1 }
    );
    assert_eq!(
        TimeSeries::new(vec![(0.0, -3.0), (1.0, 1.0)]).unwrap_err(),
        StatsError::NonPositiveQ { index: 0 }
    );
    assert!(TimeSeries::new(vec![(0.0, f64::NAN), (1.0, 1.0)]).is_err());
    assert!(TimeSeries::from_columns(vec![0.0, 1.0], vec![1.0]).is_err());

    let s = TimeSeries::from_columns(vec![0.0, 2.0, 5.0], vec![1.0, 4.0, 9.0]).unwrap();
    assert_eq!(s.len(), 3);
    assert_eq!(s.span(), (0.0, 5.0));
    assert_eq!(s.points().nth(1), Some((2.0, 4.0)));
}

#[test]
fn mk_s_examples() {
    let inc: Vec<f64> = (1..=8).map(|v| v as f64).collect();
    assert_eq!(mk_s(&inc).unwrap(), 28);
    assert_eq!(mk_s(&[5.0; 8]).unwrap(), 0);
    // pairs of [3,1,2]: (3,1) -1, (3,2) -1, (1,2) +1
    assert_eq!(mk_s(&[3.0, 1.0, 2.0]).unwrap(), -1);
    assert_eq!(mk_s(&[1.0]).unwrap_err(), StatsError::TooShort { n: 1, min: 2 });
    assert!(mk_s(&[1.0, f64::NAN]).is_err());
}

#[test]
fn mk_s_is_antisymmetric_under_reversal() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let mut v: Vec<f64> = (0..25).map(|_| rng.gen_range(-5.0..5.0)).collect();
        // inject some exact ties
        v[3] = v[17];
        v[8] = v[9];
        let s = mk_s(&v).unwrap();
        let mut r = v.clone();
        r.reverse();
        assert_eq!(mk_s(&r).unwrap(), -s);
        let bound = (v.len() * (v.len() - 1) / 2) as i64;
        assert!(s.abs() <= bound);
    }
}

#[test]
fn mk_test_frozen_increasing_case() {
    let inc: Vec<f64> = (1..=8).map(|v| v as f64).collect();
    let r = mk_test(&inc, TrendDirection::Increasing).unwrap();
    assert_eq!(r.s, 28);
    assert_eq!(r.n, 8);
    // var = 8*7*21/18
    assert!(close(r.var_s, 65.333333333333329, 1e-12));
    assert!(close(r.z, 3.3403837003114059, 1e-12), "{}", r.z);
    assert!(close(r.p_one_tailed, 4.1831356555965219e-4, 1e-12));
    assert!(r.p_one_tailed < 0.001);

    // reversal flips the score and makes the decreasing tail equally small
    let mut dec = inc.clone();
    dec.reverse();
    let rd = mk_test(&dec, TrendDirection::Decreasing).unwrap();
    assert_eq!(rd.s, -28);
    assert!(close(rd.z, -r.z, 1e-15));
    assert!(close(rd.p_one_tailed, r.p_one_tailed, 1e-15));
    // looking for the wrong direction sees nothing
    let rw = mk_test(&dec, TrendDirection::Increasing).unwrap();
    assert!(rw.p_one_tailed > 0.999);
}

#[test]
fn mk_test_applies_tie_correction() {
    // tie groups {5: 2, 8: 3} remove 2*1*9 + 3*2*11 = 84 from the
    // uncorrected 12*11*29, leaving var = 3744/18 = 208
    let v = [3.0, 5.0, 5.0, 7.0, 6.0, 8.0, 8.0, 8.0, 10.0, 12.0, 11.0, 14.0];
    let r = mk_test(&v, TrendDirection::Increasing).unwrap();
    assert_eq!(r.s, 58);
    assert!(close(r.var_s, 208.0, 1e-12));
    assert!(close(r.z, 3.9522388981047576, 1e-12), "{}", r.z);
    assert!(close(r.p_one_tailed, 3.8711693923528857e-5, 1e-14));
}

#[test]
fn mk_test_rejects_short_and_degenerate_input() {
    let seven = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
    assert_eq!(
        mk_test(&seven, TrendDirection::Increasing).unwrap_err(),
        StatsError::TooShort { n: 7, min: 8 }
    );
    assert_eq!(
        mk_test(&[2.0; 10], TrendDirection::Increasing).unwrap_err(),
        StatsError::ZeroVariance
    );
}

#[test]
fn mk_test_null_rejection_rate_is_calibrated() {
    // shuffling an i.i.d. sample must trip the alpha = 0.05 gate about 5%
    // of the time; the continuity correction biases slightly conservative
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let base: Vec<f64> = (0..20)
        .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
        .collect();
    let mut sample = base;
    let trials = 10_000;
    let mut rejections = 0usize;
    for _ in 0..trials {
        sample.shuffle(&mut rng);
        let r = mk_test(&sample, TrendDirection::Increasing).unwrap();
        if r.p_one_tailed < 0.05 {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / trials as f64;
    assert!((0.03..=0.07).contains(&rate), "rejection rate {rate}");
}

#[test]
fn growth_rates_are_exact_for_exponentials() {
    let t: Vec<f64> = [0.0, 1.0, 2.5, 2.7, 6.0, 11.0].to_vec();
    let q: Vec<f64> = t.iter().map(|&ti| 3.0 * (0.05f64 * ti).exp()).collect();
    let series = TimeSeries::from_columns(t, q).unwrap();
    let rates = growth_rates(&series);
    assert_eq!(rates.len(), series.len() - 1);
    for (tm, g) in rates {
        assert!(close(g, 0.05, 1e-13), "t = {tm}: g = {g}");
    }
}

#[test]
fn growth_rates_spot_values() {
    let series = TimeSeries::from_columns(vec![0.0, 1.0], vec![100.0, 110.0]).unwrap();
    let rates = growth_rates(&series);
    assert_eq!(rates.len(), 1);
    assert!(close(rates[0].0, 0.5, 0.0));
    assert!(close(rates[0].1, 0.09531017980432486, 1e-15));

    let flat = TimeSeries::from_columns(vec![0.0, 3.0, 7.0], vec![4.0, 4.0, 4.0]).unwrap();
    for (_, g) in growth_rates(&flat) {
        assert_eq!(g, 0.0);
    }
}

#[test]
fn growth_rates_recover_the_profile_rate() {
    // sampling Q(t) = Q_h h(g_u (t - t_h)) densely and differencing must
    // reproduce g(t) = g_u / (1 + f) at the midpoints
    let settings = SolverSettings::default();
    let fams = [GrowthFamily::single_term(1).unwrap(), GrowthFamily::Logistic];
    for fam in &fams {
        let (g_u, q_h, t_h) = (0.25, 1000.0, 40.0);
        let mut t = Vec::new();
        let mut q = Vec::new();
        let mut ti = 0.0;
        while ti <= 80.0 {
            let x = g_u * (ti - t_h);
            let h = h_of_x(fam, x, &settings).unwrap();
            t.push(ti);
            q.push(q_h * h);
            ti += 0.05;
        }
        let series = TimeSeries::from_columns(t, q).unwrap();
        for (tm, g_num) in growth_rates(&series) {
            let h_mid = h_of_x(fam, g_u * (tm - t_h), &settings).unwrap();
            let g_true = g_u * growth_rate_factor(fam, h_mid).unwrap();
            assert!(
                (g_num / g_true - 1.0).abs() <= 1e-4,
                "{}: t = {tm}, {g_num} vs {g_true}",
                fam.label()
            );
        }
    }
}

#[test]
fn f_test_frozen_example() {
    // gain = (2-1)/1, noise = 1/96, so F = 96 exactly
    let r = f_test(2.0, 1.0, 3, 4, 100, 0.05).unwrap();
    assert_eq!(r.f, 96.0);
    assert_eq!((r.df1, r.df2), (1, 96));
    assert!((r.p_value / 4.0403824729092827e-16 - 1.0).abs() < 1e-8, "{}", r.p_value);
    assert!(r.reject_null);
    assert_eq!(r.alpha, 0.05);
}

#[test]
fn f_test_handles_no_improvement_and_degenerate_cases() {
    // equal residuals: no evidence at all
    let r = f_test(1.0, 1.0, 2, 3, 50, 0.05).unwrap();
    assert_eq!((r.f, r.p_value), (0.0, 1.0));
    assert!(!r.reject_null);
    // optimizer noise can leave the full model marginally worse; clamp
    let r = f_test(1.0, 1.0 + 1e-12, 2, 3, 50, 0.05).unwrap();
    assert_eq!((r.f, r.p_value), (0.0, 1.0));
    // exact interpolation by the full model
    let r = f_test(1.0, 0.0, 2, 3, 50, 0.05).unwrap();
    assert!(r.f.is_infinite());
    assert_eq!(r.p_value, 0.0);
    assert!(r.reject_null);
    // both models exact: still no evidence for the extra parameter
    let r = f_test(0.0, 0.0, 2, 3, 50, 0.05).unwrap();
    assert_eq!((r.f, r.p_value), (0.0, 1.0));

    assert_eq!(
        f_test(2.0, 1.0, 3, 4, 4, 0.05).unwrap_err(),
        StatsError::DegenerateDof { n: 4, p_full: 4 }
    );
    assert!(f_test(2.0, 1.0, 4, 4, 50, 0.05).is_err());
    assert!(f_test(2.0, 1.0, 3, 4, 50, 0.0).is_err());
    assert!(f_test(2.0, 1.0, 3, 4, 50, 1.0).is_err());
    assert!(f_test(-1.0, 1.0, 3, 4, 50, 0.05).is_err());
    assert!(f_test(f64::NAN, 1.0, 3, 4, 50, 0.05).is_err());
}

#[test]
fn f_test_p_value_tracks_the_statistic() {
    // a weaker improvement must never look more significant
    let mut last_p = 0.0;
    for rss_f in [0.5, 0.6, 0.7, 0.8, 0.9, 0.99] {
        let r = f_test(1.0, rss_f, 2, 3, 30, 0.05).unwrap();
        assert!(r.p_value >= last_p, "rss_f = {rss_f}");
        last_p = r.p_value;
    }
}

#[test]
fn r2_fvu_examples() {
    let g = r2_fvu(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
    assert_eq!((g.r2, g.fvu), (1.0, 0.0));
    assert_eq!((g.r2_log, g.fvu_log), (Some(1.0), Some(0.0)));

    // predicting the mean explains nothing
    let g = r2_fvu(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap();
    assert!(close(g.fvu, 1.0, 1e-15));
    assert!(close(g.r2, 0.0, 1e-15));

    // ss_res = 1, ss_tot = 2
    let g = r2_fvu(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap();
    assert!(close(g.fvu, 0.5, 1e-15));
    assert!(close(g.r2, 0.5, 1e-15));

    // log variant drops out when a prediction is not positive
    let g = r2_fvu(&[1.0, 2.0, 3.0], &[1.0, -2.0, 4.0]).unwrap();
    assert!(g.fvu_log.is_none() && g.r2_log.is_none());

    assert_eq!(
        r2_fvu(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).unwrap_err(),
        StatsError::ZeroVariance
    );
    assert_eq!(
        r2_fvu(&[1.0, 2.0], &[1.0]).unwrap_err(),
        StatsError::LengthMismatch { left: 2, right: 1 }
    );
    assert!(r2_fvu(&[1.0], &[1.0]).is_err());
}

#[test]
fn r2_fvu_log_variant_differs_on_relative_errors(){
    // constant relative error is invisible to the log r2 offset but not
    // the linear one, so the two summaries must genuinely differ
    let data = [1.0, 10.0, 100.0, 1000.0];
    let pred: Vec<f64> = data.iter().map(|v| v * 1.1).collect();
    let g = r2_fvu(&data, &pred).unwrap();
    assert!(g.fvu > 0.0);
    let lin_gap = (g.fvu - g.fvu_log.unwrap()).abs();
    assert!(lin_gap > 1e-6, "log and linear fvu unexpectedly agree");
}
