use super::*;
use super::output::{format_sig, sort_records, SNR_DEFINITION};

fn small(precoder: PrecoderId) -> SimConfig {
    SimConfig {
        n_tx: 4,
        n_users: 2,
        bits: 1,
        eta: 0.0,
        snr_db: vec![0.0, 10.0],
        scheme: Scheme::Qpsk,
        trials: 3,
        master_seed: 1,
        precoder,
        power: 1.0,
        error_mode: ErrorMode::Bounded,
        settings: PrecoderSettings::default(),
    }
}

#[test]
fn trials_are_deterministic() {
    let cfg = small(PrecoderId::Rsdr);
    assert_eq!(run_trial(&cfg, 2).unwrap(), run_trial(&cfg, 2).unwrap());
}

fn grid() -> SweepConfig {
    SweepConfig {
        n_tx: 4,
        n_users: 2,
        bits: vec![1, 2],
        etas: vec![0.0, 0.2],
        snr_db: vec![0.0, 5.0, 10.0],
        scheme: Scheme::Qpsk,
        trials: 4,
        master_seed: 7,
        precoders: vec![PrecoderId::ZfQuantized, PrecoderId::Rsdr],
        power: 1.0,
        error_mode: ErrorMode::Gaussian,
        settings: PrecoderSettings::default(),
    }
}

#[test]
fn sweep_emits_one_record_per_grid_point() {
    let out = sweep(&grid()).unwrap();
    assert_eq!(out.records.len(), 2 * 2 * 2 * 3);
    assert!(out.fallbacks.is_empty());
    for r in &out.records {
        assert_eq!(r.trials, 4);
        assert_eq!(r.symbols, 8);
        assert!((r.ber - r.bit_errors as f64 / 16.0).abs() < 1e-15);
    }
    let mut sorted = out.records.clone();
    sort_records(&mut sorted);
    assert_eq!(sorted, out.records);
}

#[test]
fn sweeps_are_reproducible_byte_for_byte() {
    let a = to_csv_string(&sweep(&grid()).unwrap().records).unwrap();
    let b = to_csv_string(&sweep(&grid()).unwrap().records).unwrap();
    assert_eq!(a, b);
    let mut other = grid();
    other.master_seed = 8;
    assert_ne!(a, to_csv_string(&sweep(&other).unwrap().records).unwrap());
}

#[test]
fn parallel_and_sequential_agree() {
    let cfg = grid();
    assert_eq!(sweep_with(&cfg, Execution::Parallel).unwrap(), sweep_with(&cfg, Execution::Sequential).unwrap());
}

#[test]
fn every_precoder_spends_the_full_power() {
    let mut rng = trial_rng(3, 0, purpose::ESTIMATE);
    let h = channel::generate_estimate(2, 4, &mut rng).unwrap();
    let s = modulate(&[0, 1, 1, 0], &ConstellationSpec::new(Scheme::Qpsk)).unwrap();
    let spec = quantizer::build_uniform_quantizer(2, full_scale_step(4, 2, 2.5)).unwrap();
    let settings = PrecoderSettings::default();
    for id in [PrecoderId::ZfInf, PrecoderId::ZfQuantized, PrecoderId::Rsdr, PrecoderId::Sdr, PrecoderId::Exhaustive] {
        let out = precode(id, &h, &s, &spec, 0.1, 2.5, &settings, &mut rng).unwrap();
        let p: f64 = out.x.iter().map(|v| v.norm_sqr()).sum();
        assert!((p - 2.5).abs() < 1e-9, "{id}: {p}");
        assert!(out.beta > 0.0, "{id}");
        assert_eq!(out.label, id);
    }
}

#[test]
fn full_scale_step_puts_the_largest_label_on_the_power_budget() {
    for (n, b, p) in [(4, 1, 1.0), (16, 3, 2.0), (8, 2, 0.5)] {
        let step = full_scale_step(n, b, p);
        let top = ((1u64 << b) - 1) as f64 * step / 2.0;
        assert!((2.0 * n as f64 * top * top - p).abs() < 1e-12);
    }
}

/// Entries of `x` divided by the smallest magnitude must be odd integers
/// below `2^B`, as for any scaled member of the label grid.
fn on_scaled_grid(x: &[Complex64], bits: u32) -> bool {
    let parts: Vec<f64> = x.iter().flat_map(|v| [v.re, v.im]).collect();
    let unit = parts.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    unit > 0.0
        && parts.iter().all(|v| {
            let r = v.abs() / unit;
            let k = r.round();
            (r - k).abs() < 1e-9 && k as u64 % 2 == 1 && (k as u64) < (1u64 << bits)
        })
}

#[test]
fn quantized_precoders_stay_on_the_output_alphabet() {
    for bits in 1..=3 {
        let mut rng = trial_rng(5, bits as u64, purpose::ESTIMATE);
        let h = channel::generate_estimate(2, 4, &mut rng).unwrap();
        let s = modulate(&[1, 1, 0, 1], &ConstellationSpec::new(Scheme::Qpsk)).unwrap();
        let spec = quantizer::build_uniform_quantizer(bits, full_scale_step(4, bits, 1.0)).unwrap();
        for id in [PrecoderId::ZfQuantized, PrecoderId::Rsdr, PrecoderId::Sdr] {
            let out = precode(id, &h, &s, &spec, 0.0, 1.0, &PrecoderSettings::default(), &mut rng).unwrap();
            assert!(on_scaled_grid(&out.x, bits), "{id} B={bits}: {:?}", out.x);
        }
    }
}

#[test]
fn high_snr_links_are_error_free() {
    let cfg = SimConfig { n_tx: 8, n_users: 2, bits: 3, snr_db: vec![60.0], trials: 100, ..small(PrecoderId::Rsdr) };
    let clean = (0..cfg.trials).filter(|&t| run_trial(&cfg, t).unwrap().bit_errors[0] == 0).count();
    assert!(clean >= 99, "{clean}/100 error-free trials");
}

#[test]
fn channel_error_raises_the_aggregate_ber() {
    let base = SimConfig {
        n_tx: 16,
        n_users: 4,
        bits: 3,
        snr_db: vec![10.0],
        trials: 2000,
        error_mode: ErrorMode::Gaussian,
        ..small(PrecoderId::ZfQuantized)
    };
    let ber = |eta: f64| simulate(&SimConfig { eta, ..base.clone() }, Execution::Parallel).unwrap().0[0].ber;
    let (clean, noisy) = (ber(0.0), ber(0.2));
    assert!(clean <= noisy, "{clean} > {noisy}");
}

#[test]
fn quantized_zf_ber_falls_with_snr() {
    let cfg = SimConfig {
        n_tx: 16,
        n_users: 4,
        bits: 2,
        snr_db: vec![-4.0, 0.0, 4.0, 8.0, 12.0],
        trials: 2000,
        ..small(PrecoderId::ZfQuantized)
    };
    let (recs, _) = simulate(&cfg, Execution::Parallel).unwrap();
    for w in recs.windows(2) {
        let bits = (w[0].symbols * 2) as f64;
        let sd = ((w[0].ber * (1.0 - w[0].ber) + w[1].ber * (1.0 - w[1].ber)) / bits).sqrt();
        assert!(w[1].ber <= w[0].ber + 2.0 * sd, "{} dB: {} then {}", w[1].snr_db, w[0].ber, w[1].ber);
    }
    assert!(recs[4].ber < recs[0].ber);
}

#[test]
fn one_point_one_trial_gives_one_record() {
    let cfg = SweepConfig { bits: vec![1], etas: vec![0.0], snr_db: vec![3.0], trials: 1, precoders: vec![PrecoderId::ZfInf], ..grid() };
    assert_eq!(sweep(&cfg).unwrap().records.len(), 1);
}

#[test]
fn failing_precoders_fall_back_to_guessing() {
    // 2N·B = 32 sign variables is beyond the exhaustive search limit.
    let cfg = SimConfig { n_tx: 16, n_users: 2, trials: 50, ..small(PrecoderId::Exhaustive) };
    let (recs, fb) = simulate(&cfg, Execution::Sequential).unwrap();
    assert_eq!(fb, 50);
    assert!(recs.iter().all(|r| r.bit_errors == recs[0].bit_errors));
    assert!((recs[0].ber - 0.5).abs() < 0.15, "{}", recs[0].ber);
    let sweep_cfg = SweepConfig { precoders: vec![PrecoderId::Exhaustive], bits: vec![1], etas: vec![0.0], n_tx: 16, trials: 5, ..grid() };
    let out = sweep(&sweep_cfg).unwrap();
    assert_eq!(out.fallbacks, vec![FallbackCount { precoder: PrecoderId::Exhaustive, bits: 1, eta: 0.0, trials: 5 }]);
}

#[test]
fn invalid_configurations_are_rejected() {
    let ok = small(PrecoderId::ZfInf);
    assert!(ok.validate().is_ok());
    for bad in [
        SimConfig { trials: 0, ..ok.clone() },
        SimConfig { bits: 4, ..ok.clone() },
        SimConfig { eta: 1.5, ..ok.clone() },
        SimConfig { snr_db: vec![], ..ok.clone() },
        SimConfig { n_users: 5, ..ok.clone() },
        SimConfig { power: 0.0, ..ok.clone() },
    ] {
        assert!(matches!(simulate(&bad, Execution::Sequential), Err(Error::Config(_))), "{bad:?}");
    }
    assert!(SweepConfig { etas: vec![], ..grid() }.validate().is_err());
}

#[test]
fn config_json_round_trips_with_defaults() {
    let text = r#"{"n_tx": 4, "n_users": 2, "bits": [1], "etas": [0.0], "snr_db": [3.0],
        "trials": 2, "master_seed": 9, "precoders": ["zf_inf", "rsdr"]}"#;
    let cfg: SweepConfig = serde_json::from_str(text).unwrap();
    assert_eq!(cfg.scheme, Scheme::Qpsk);
    assert_eq!(cfg.power, 1.0);
    assert_eq!(cfg.settings, PrecoderSettings::default());
    let back: SweepConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
    assert_eq!(back, cfg);
}

mod csv_output {
    use super::*;
    use proptest::prelude::*;

    fn record(ber_errors: u64) -> BerRecord {
        BerRecord { precoder: PrecoderId::Rsdr, bits: 2, eta: 0.1, snr_db: 4.0, trials: 3, symbols: 12, bit_errors: ber_errors, ber: ber_errors as f64 / 24.0 }
    }

    #[test]
    fn one_record_gives_header_and_one_row() {
        let text = to_csv_string(&[record(5)]).unwrap();
        assert_eq!(text, "precoder,bits,eta,snr_db,trials,symbols,bit_errors,ber\nrsdr,2,0.1000000000,4.000000000,3,12,5,0.2083333333\n");
    }

    #[test]
    fn files_round_trip_and_reemit_identically() {
        let dir = std::env::temp_dir().join(format!("quantmimo-csv-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("ber.csv");
        let records = vec![record(5), BerRecord { precoder: PrecoderId::ZfInf, ..record(0) }];
        emit_csv(&records, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let parsed = parse_csv(&text).unwrap();
        assert_eq!(to_csv_string(&parsed).unwrap(), text);
        assert_eq!(parsed[0].precoder, PrecoderId::Rsdr);
        assert_eq!(parsed[1].bit_errors, 0);
        assert!(emit_csv(&[], &path).is_err());
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn foreign_headers_are_rejected() {
        assert!(parse_csv("a,b\n1,2\n").is_err());
        assert!(parse_csv("precoder,bits,eta,snr_db,trials,symbols,bit_errors,ber\nnope,1,0,0,1,1,0,0\n").is_err());
    }

    #[test]
    fn format_sig_keeps_ten_digits() {
        assert_eq!(format_sig(0.0), "0");
        assert_eq!(format_sig(1.0), "1.000000000");
        assert_eq!(format_sig(9.99999999999), "10.00000000");
        assert_eq!(format_sig(-0.000123456789012), "-0.0001234567890");
        assert_eq!(format_sig(12345678901234.0), "12345678901234");
    }

    #[test]
    fn sidecar_records_the_snr_convention() {
        let path = std::env::temp_dir().join(format!("quantmimo-sidecar-{}.json", std::process::id()));
        write_sidecar(&path, &grid(), 1.5, &[]).unwrap();
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(v["snr_definition"], SNR_DEFINITION);
        assert_eq!(v["config"]["n_tx"], 4);
        assert_eq!(v["wall_time_s"], 1.5);
        std::fs::remove_file(&path).unwrap();
    }

    fn any_record() -> impl Strategy<Value = BerRecord> {
        (0usize..5, 1u32..=3, 0.0f64..1.0, -20.0f64..40.0, 1u64..10_000, 0u64..1000).prop_map(|(p, bits, eta, snr_db, trials, errs)| {
            let precoder = [PrecoderId::ZfInf, PrecoderId::ZfQuantized, PrecoderId::Rsdr, PrecoderId::Sdr, PrecoderId::Exhaustive][p];
            let symbols = trials * 4;
            let bit_errors = errs.min(symbols * 2);
            BerRecord { precoder, bits, eta, snr_db, trials, symbols, bit_errors, ber: bit_errors as f64 / (symbols * 2) as f64 }
        })
    }

    proptest! {
        #[test]
        fn parsing_recovers_records_to_ten_digits(records in proptest::collection::vec(any_record(), 1..12)) {
            let text = to_csv_string(&records).unwrap();
            let parsed = parse_csv(&text).unwrap();
            prop_assert_eq!(parsed.len(), records.len());
            let mut sorted = records.clone();
            sort_records(&mut sorted);
            for (a, b) in sorted.iter().zip(&parsed) {
                prop_assert_eq!(a.precoder, b.precoder);
                prop_assert_eq!((a.bits, a.trials, a.symbols, a.bit_errors), (b.bits, b.trials, b.symbols, b.bit_errors));
                for (x, y) in [(a.eta, b.eta), (a.snr_db, b.snr_db), (a.ber, b.ber)] {
                    prop_assert!((x - y).abs() <= 5e-10 * x.abs().max(1e-300) + 1e-300, "{} vs {}", x, y);
                }
            }
            prop_assert_eq!(to_csv_string(&parsed).unwrap(), text);
        }

        #[test]
        fn row_order_does_not_depend_on_input_order(records in proptest::collection::vec(any_record(), 1..12), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let mut shuffled = records.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(to_csv_string(&records).unwrap(), to_csv_string(&shuffled).unwrap());
        }
    }
}
