use std::f64::consts::PI;

use ccnn_core::signal::{
    cheby2_bandpass, hamming_window, periodogram_psd, resample, welch_cpsd, welch_psd, white_noise, TimeSeries,
};
use proptest::prelude::*;

fn mean_square(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

fn tone(hz: f64, fs: f64, n: usize) -> TimeSeries {
    TimeSeries::new((0..n).map(|i| (2.0 * PI * hz * i as f64 / fs).sin()).collect(), fs).unwrap()
}

#[test]
fn welch_power_tracks_variance_of_long_noise() {
    for seed in 0..4 {
        let ts = white_noise(1 << 18, seed, 100.0);
        let psd = welch_psd(&ts, 1024, 0.5).unwrap();
        let power: f64 = psd.values().iter().sum::<f64>() * psd.resolution();
        let var = ts.variance();
        assert!((power - var).abs() < 0.01 * var, "seed {seed}: {power} vs {var}");
    }
}

#[test]
fn resampled_tone_keeps_its_bin() {
    for (hz, up, down) in [(5.0, 3, 5), (12.5, 3, 5), (7.0, 2, 1), (20.0, 1, 2)] {
        let fs = 100.0;
        let out = resample(&tone(hz, fs, 8192), up, down).unwrap();
        let psd = periodogram_psd(&out).unwrap();
        let bin = psd.resolution();
        let peak = psd.peak_frequency().unwrap();
        assert!((peak - hz).abs() <= bin, "{hz} Hz {up}/{down}: {peak} (bin {bin})");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn periodogram_parseval(seed in any::<u64>(), n in 1024usize..6000, fs in 1.0f64..500.0) {
        let ts = white_noise(n, seed, fs);
        let psd = periodogram_psd(&ts).unwrap();
        let power = psd.values().iter().sum::<f64>() * psd.resolution();
        let ms = mean_square(ts.samples());
        prop_assert!((power - ms).abs() <= 1e-10 * ms);
        prop_assert!((power - ts.variance()).abs() <= 0.01 * ts.variance());
    }

    /// Per segment, windowed energy over window energy is the density integral.
    #[test]
    fn welch_integral_is_windowed_mean_square(seed in any::<u64>(), n in 256usize..3000, w in 16usize..256, overlap in 0.0f64..0.9) {
        let ts = white_noise(n, seed, 50.0);
        let psd = welch_psd(&ts, w, overlap).unwrap();
        let win = hamming_window(w).unwrap();
        let step = w - (overlap * w as f64).floor() as usize;
        let segs = (n - w) / step + 1;
        let wss: f64 = win.iter().map(|v| v * v).sum();
        let want = (0..segs)
            .map(|s| ts.samples()[s * step..s * step + w].iter().zip(&win).map(|(x, h)| (x * h).powi(2)).sum::<f64>() / wss)
            .sum::<f64>()
            / segs as f64;
        let got = psd.values().iter().sum::<f64>() * psd.resolution();
        prop_assert!((got - want).abs() <= 1e-9 * want, "{got} vs {want}");
    }

    #[test]
    fn cpsd_is_conjugate_symmetric(sx in any::<u64>(), sy in any::<u64>(), w in 8usize..200) {
        let x = white_noise(1000, sx, 10.0);
        let y = white_noise(1000, sy, 10.0);
        let xy = welch_cpsd(&x, &y, w, 0.5).unwrap();
        let yx = welch_cpsd(&y, &x, w, 0.5).unwrap().conj();
        prop_assert_eq!(xy.values(), yx.values());
    }

    #[test]
    fn hamming_is_exactly_symmetric(n in 1usize..5000) {
        let w = hamming_window(n).unwrap();
        for k in 0..n {
            prop_assert_eq!(w[k].to_bits(), w[n - 1 - k].to_bits());
        }
    }

    #[test]
    fn cheby2_is_stable(order in 1usize..10, atten in 10.0f64..90.0, lo in 0.01f64..0.8, width in 0.01f64..0.5, fs in 10.0f64..1000.0) {
        let f_lo = lo * fs / 2.0;
        let f_hi = (lo + width).min(0.99) * fs / 2.0;
        prop_assume!(f_hi > f_lo * 1.001);
        let c = cheby2_bandpass(order, atten, f_lo, f_hi, fs).unwrap();
        for s in c.sections() {
            prop_assert!(s.pole_radius() < 1.0, "radius {}", s.pole_radius());
        }
    }

    #[test]
    fn resample_identity_when_rates_match(seed in any::<u64>(), n in 1usize..2000, r in 1usize..6) {
        let ts = white_noise(n, seed, 100.0);
        let out = resample(&ts, r, r).unwrap();
        prop_assert_eq!(out.samples(), ts.samples());
        prop_assert_eq!(out.fs(), ts.fs());
    }

    #[test]
    fn white_noise_is_reproducible(seed in any::<u64>(), n in 0usize..4000) {
        let a = white_noise(n, seed, 1.0);
        let b = white_noise(n, seed, 1.0);
        prop_assert!(a.samples().iter().zip(b.samples()).all(|(x, y)| x.to_bits() == y.to_bits()));
        // Streams are prefixes of each other.
        let c = white_noise(n + 17, seed, 1.0);
        prop_assert_eq!(&c.samples()[..n], a.samples());
    }
}
