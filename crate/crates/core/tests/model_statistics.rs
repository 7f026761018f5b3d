//! Distributional checks on the random draws, at fixed seeds.

use seqanm::model::{draw_paths, draw_pattern, observe, synth_channel, ChannelMatrix, SamplingPattern, TrialStreams};
use seqanm::{c64, Mat};

#[test]
fn total_gain_power_is_one() {
    let s = TrialStreams::from_u64(101);
    let mut rng = s.stream(TrialStreams::PATHS);
    let draws = 100_000;
    let mut acc = 0.0;
    for _ in 0..draws / 4 {
        let paths = draw_paths(4, &mut rng, 0.25).unwrap();
        acc += paths.paths().iter().map(|p| p.gain.norm_sqr()).sum::<f64>();
    }
    let mean = acc / (draws / 4) as f64;
    assert!((mean - 1.0).abs() <= 0.02, "mean total gain power {mean}");
}

#[test]
fn aoas_and_delays_are_uniform() {
    let s = TrialStreams::from_u64(102);
    let mut rng = s.stream(TrialStreams::PATHS);
    let bins = 20;
    let draws = 50_000;
    let (mut aoa_hist, mut delay_hist) = (vec![0usize; bins], vec![0usize; bins]);
    for _ in 0..draws {
        let p = draw_paths(1, &mut rng, 0.25).unwrap().paths()[0];
        assert!((0.0..1.0).contains(&p.aoa));
        assert!((0.0..0.25).contains(&p.delay));
        aoa_hist[(p.aoa * bins as f64) as usize] += 1;
        delay_hist[(p.delay / 0.25 * bins as f64) as usize] += 1;
    }
    let expect = draws as f64 / bins as f64;
    for hist in [&aoa_hist, &delay_hist] {
        let chi2: f64 = hist.iter().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
        // 99.9th percentile of chi-square with 19 degrees of freedom
        assert!(chi2 < 43.82, "chi-square {chi2}");
    }
}

#[test]
fn pattern_inclusion_probability_matches_fraction() {
    let s = TrialStreams::from_u64(103);
    let mut rng = s.stream(TrialStreams::PATTERN);
    let (m, n, mp, np) = (16, 20, 5, 7);
    let draws = 40_000;
    let (mut ant, mut pil) = (vec![0usize; m], vec![0usize; n]);
    for _ in 0..draws {
        let pat = draw_pattern(m, n, mp, np, &mut rng).unwrap();
        assert_eq!(pat.mp(), mp);
        assert_eq!(pat.np(), np);
        for &a in pat.antenna_set() {
            ant[a] += 1;
        }
        for &p in pat.pilot_set() {
            pil[p] += 1;
        }
    }
    for (hist, frac) in [(&ant, mp as f64 / m as f64), (&pil, np as f64 / n as f64)] {
        for &c in hist.iter() {
            let p = c as f64 / draws as f64;
            assert!((p - frac).abs() <= 0.01, "inclusion {p} vs {frac}");
        }
    }
}

#[test]
fn noise_power_matches_variance() {
    let s = TrialStreams::from_u64(104);
    let (m, n) = (64, 64);
    let h = ChannelMatrix::new(Mat::<c64>::zeros(m, n));
    let pattern = SamplingPattern::full(m, n);
    let mut rng = s.stream(TrialStreams::NOISE);
    let mut acc = 0.0;
    let reps = 25;
    for _ in 0..reps {
        let obs = observe(&h, &pattern, 0.1, &mut rng).unwrap();
        acc += obs.y.squared_norm_l2();
    }
    let power = acc / (reps * m * n) as f64;
    assert!((power / 0.1 - 1.0).abs() <= 0.02, "noise power {power}");
}

#[test]
fn channel_power_per_element_is_one_on_average() {
    let s = TrialStreams::from_u64(105);
    let mut rng = s.stream(TrialStreams::PATHS);
    let reps = 4000;
    let mut acc = 0.0;
    for _ in 0..reps {
        let paths = draw_paths(3, &mut rng, 0.25).unwrap();
        let h = synth_channel(&paths, 8, 8).unwrap();
        acc += h.as_mat().squared_norm_l2() / 64.0;
    }
    let mean = acc / reps as f64;
    assert!((mean - 1.0).abs() < 0.05, "per-element power {mean}");
}

#[test]
fn streams_are_independent_of_each_other() {
    let s = TrialStreams::from_u64(106);
    let a = draw_paths(3, &mut s.stream(TrialStreams::PATHS), 0.25).unwrap();
    // consuming the noise stream first leaves the path draw unchanged
    let mut noise = s.stream(TrialStreams::NOISE);
    let _ = observe(
        &ChannelMatrix::new(Mat::<c64>::zeros(4, 4)),
        &SamplingPattern::full(4, 4),
        1.0,
        &mut noise,
    )
    .unwrap();
    let b = draw_paths(3, &mut s.stream(TrialStreams::PATHS), 0.25).unwrap();
    assert_eq!(a, b);
}
