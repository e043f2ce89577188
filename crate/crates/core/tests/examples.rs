//! Worked examples for synthesis, information theory and the scenarios.

use std::path::Path;

use leakguess::curves::{gap_curve, optimal_curve, reorder, CurveKind, GapExtension, OrderMode, Unit};
use leakguess::dist::{rank, tail_stats};
use leakguess::experiments::{self, ReportG, ScenarioConfig};
use leakguess::infotheory::{atypicality_rate, kl_divergence, sanov_report};
use leakguess::ingest::{anonymize, FrequencyTable};
use leakguess::synth::{from_profile, generate, preset, tail_profile, ZipfMandelbrotSpec};

fn cfg(text: &str) -> ScenarioConfig {
    ScenarioConfig::parse(text, "test", Path::new(".")).unwrap()
}

#[test]
fn uniform_law_counts_within_four_sigma() {
    let t = generate(&ZipfMandelbrotSpec::new(4, 0.0, 0.0, 40_000, 99)).unwrap();
    let sigma = (40_000.0f64 * 0.25 * 0.75).sqrt();
    assert_eq!(t.unique_count(), 4);
    for (_, c) in t.iter() {
        assert!((c as f64 - 10_000.0).abs() < 4.0 * sigma, "{c}");
    }
}

#[test]
fn head_ranks_follow_the_law() {
    let spec = ZipfMandelbrotSpec::new(5000, 1.2, 2.5, 500_000, 7);
    let t = generate(&spec).unwrap();
    let p = spec.probabilities().unwrap();
    let n = spec.users as f64;
    let mut chi2 = 0.0;
    for (r, &pr) in p.iter().take(20).enumerate() {
        let c = t.count(spec.token(r as u64 + 1).as_bytes()) as f64;
        let sd = (n * pr * (1.0 - pr)).sqrt();
        assert!((c - n * pr).abs() < 4.0 * sd, "rank {}", r + 1);
        chi2 += (c - n * pr).powi(2) / (n * pr);
    }
    // chi-square with 20 degrees of freedom: mean 20, sd sqrt(40)
    assert!(chi2 < 20.0 + 4.0 * 40f64.sqrt(), "{chi2}");
    let counts: Vec<u64> = (1..=20).map(|r| t.count(spec.token(r).as_bytes())).collect();
    assert!(counts.windows(2).all(|w| w[0] >= w[1]), "{counts:?}");
}

/// Expected singleton share for V=10^5, s=0.9, N=10^6 from the Poisson
/// approximation `sum λe^-λ / sum (1-e^-λ)` with `λ_r = N p_r`, computed
/// independently: 17030.65 / 91274.53 = 0.1866.
#[test]
fn singleton_share_of_a_mild_law() {
    let t = generate(&ZipfMandelbrotSpec::new(100_000, 0.9, 0.0, 1_000_000, 2024)).unwrap();
    let s = tail_stats(&rank(&t).unwrap());
    assert_eq!((s.unique_count, s.freq1_count), (91_259, 17_184));
    let share = s.freq1_count as f64 / s.unique_count as f64;
    assert!((share - 0.1866).abs() < 0.005, "{share}");
}

#[test]
fn hotmail_shaped_profile() {
    let counts = tail_profile(420, 1050, 6250, 1.0).unwrap();
    let t = from_profile(&counts).unwrap();
    let s = tail_stats(&rank(&t).unwrap());
    assert_eq!((s.unique_count, s.freq1_count, s.freq_gt1_count), (6670, 6250, 420));
    assert_eq!(s.total_users, 7300);
    assert_eq!(anonymize(&t).counts(), counts.as_slice());
}

fn kl_counts(q: &[u64], n: u64, p: &[f64]) -> f64 {
    q.iter()
        .zip(p)
        .filter(|(&c, _)| c > 0)
        .map(|(&c, &pi)| {
            let qi = c as f64 / n as f64;
            qi * (qi / pi).log2()
        })
        .sum()
}

/// Exact probability that a with-replacement sample of size 2 is more than
/// `alpha` bits from p0, by enumerating all 10 outcome multisets.
fn exact_two_draw_rate(p: &[f64], alpha: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..p.len() {
        for j in i..p.len() {
            let prob = if i == j { p[i] * p[i] } else { 2.0 * p[i] * p[j] };
            let mut q = vec![0u64; p.len()];
            q[i] += 1;
            q[j] += 1;
            if kl_counts(&q, 2, p) > alpha {
                total += prob;
            }
        }
    }
    total
}

#[test]
fn atypicality_matches_enumeration() {
    let table = FrequencyTable::from_counts([("a", 4u64), ("b", 3), ("c", 2), ("d", 1)]).unwrap();
    let d = rank(&table).unwrap();
    let p = [0.4, 0.3, 0.2, 0.1];
    assert!((exact_two_draw_rate(&p, 0.0) - 1.0).abs() < 1e-12);
    assert_eq!(atypicality_rate(&d, 2, 0.0, 500, 1).unwrap(), 1.0);
    let trials = 20_000u64;
    for alpha in [0.8, 1.2, 1.8] {
        let exact = exact_two_draw_rate(&p, alpha);
        let got = atypicality_rate(&d, 2, alpha, trials, 2).unwrap();
        let sd = (exact * (1.0 - exact) / trials as f64).sqrt();
        assert!((got - exact).abs() <= 4.0 * sd + 1e-12, "alpha {alpha}: {got} vs {exact}");
    }
}

#[test]
fn atypicality_falls_with_sample_size() {
    let t = generate(&ZipfMandelbrotSpec::new(30, 1.0, 0.0, 3000, 5)).unwrap();
    let d = rank(&t).unwrap();
    let rates: Vec<f64> = [20u64, 100, 500]
        .iter()
        .map(|&n| atypicality_rate(&d, n, 0.2, 400, 11).unwrap())
        .collect();
    // allow Monte-Carlo noise of 4 standard errors at 400 trials
    for w in rates.windows(2) {
        assert!(w[1] <= w[0] + 0.1, "{rates:?}");
    }
    assert!(rates[2] < rates[0], "{rates:?}");
}

#[test]
fn empirical_rate_respects_nonvacuous_bound() {
    let t = FrequencyTable::from_counts([("a", 6u64), ("b", 3), ("c", 1)]).unwrap();
    let d = rank(&t).unwrap();
    for n in [300u64, 1000, 3000] {
        let rep = sanov_report(n, d.len() as u64, 0.1).unwrap();
        if !rep.is_vacuous() {
            assert!(atypicality_rate(&d, n, 0.1, 300, n).unwrap() <= rep.bound());
        }
    }
    assert!(!sanov_report(3000, 3, 0.1).unwrap().is_vacuous());
}

#[test]
fn kl_of_disjoint_support_is_infinite() {
    let a = rank(&FrequencyTable::from_counts([("x", 1u64)]).unwrap()).unwrap();
    let b = rank(&FrequencyTable::from_counts([("y", 1u64)]).unwrap()).unwrap();
    assert_eq!(kl_divergence(&a, &b), f64::INFINITY);
}

#[test]
fn full_split_self_sample_is_exact() {
    let c = cfg("scenario = self_sample\ndataset.0.preset = compubits-like\nn = full\ntrials = 1\nmode = without\nseed = 1\n");
    let out = experiments::run(&c).unwrap();
    let set = &out.curve_sets[0];
    let f = set.of_kind(CurveKind::F).next().unwrap();
    let g = set.of_kind(CurveKind::G).next().unwrap();
    assert_eq!(f.values(), g.values());
}

#[test]
fn ratio_at_full_size_reaches_optimal() {
    let c = cfg("scenario = ratio\ndataset.0.preset = compubits-like\nn = full\nmode = without\nseed = 2\nreport_g = 100\n");
    let tables = experiments::materialize(&c).unwrap();
    let f100 = optimal_curve(&rank(&tables[0]).unwrap(), Unit::Users).at_clamped(100);
    let out = experiments::run_on(&c, &tables).unwrap();
    let row = out.summary_at("compubits-like", "compubits-like", "", ReportG::At(100)).unwrap();
    assert_eq!(row.spread.min, f100);
    assert_eq!(row.trials, 10);
}

#[test]
fn replacement_samples_never_cover_the_whole_dataset() {
    let c = cfg("scenario = sample_vs_full\ndataset.0.preset = flirtlife-like\nn = 98912\nseed = 8\nreport_g = 10, max\n");
    let out = experiments::run(&c).unwrap();
    assert_eq!(out.samples.len(), 5);
    for s in &out.samples {
        assert!(s.successes.unwrap() < 98_912.0);
        assert!(s.unique < 98_912);
    }
    // frozen from the pinned seed
    let g10 = out.summary_at("flirtlife-like", "flirtlife-like", "", ReportG::At(10)).unwrap();
    assert_eq!((g10.spread.min, g10.spread.median, g10.spread.max), (277.0, 281.0, 287.0));
    let all = out.summary_at("flirtlife-like", "flirtlife-like", "", ReportG::Max).unwrap();
    assert_eq!((all.spread.min, all.spread.max), (64_036.0, 64_330.0));
}

#[test]
fn full_split_guesses_everyone() {
    let c = cfg("scenario = sample_vs_full\ndataset.0.preset = hotmail-like\nn = full\nmode = without\nseed = 3\n");
    let out = experiments::run(&c).unwrap();
    assert!(out.samples.iter().all(|s| s.successes == Some(7300.0)));
    assert!(out.audits.iter().all(|a| a.conserved));
}

#[test]
fn random_order_gap_lies_between_best_and_worst_on_average() {
    // distinct counts, so best and worst orders are unique
    let t = FrequencyTable::from_counts((1..=25u64).map(|c| (format!("t{c:02}"), c))).unwrap();
    let d = rank(&t).unwrap();
    let best = gap_curve(&d, &reorder(&d, OrderMode::Best, None, "p0").unwrap(), GapExtension::Truncate, Unit::Users);
    let worst = gap_curve(&d, &reorder(&d, OrderMode::Worst, None, "p0").unwrap(), GapExtension::Truncate, Unit::Users);
    let mut mean = vec![0.0; d.len()];
    for seed in 0..100 {
        let r = gap_curve(&d, &reorder(&d, OrderMode::Random, Some(seed), "p0").unwrap(), GapExtension::Truncate, Unit::Users);
        for (m, v) in mean.iter_mut().zip(r.values()) {
            *m += v / 100.0;
        }
    }
    for g in 0..d.len() {
        assert!(best.values()[g] <= mean[g] && mean[g] <= worst.values()[g], "g={}", g + 1);
    }

    // the scenario reports the same ordering through its summary means
    let c = cfg("scenario = gap_orderings\ndataset.0.tail_profile = 40, 200, 500\nmode = without\ntrials = 100\nseed = 4\nreport_g = 10, 100, 300\n");
    let out = experiments::run(&c).unwrap();
    for g in [10, 100, 300] {
        let at = |label: &str| out.summary_at("d0", "d0", label, ReportG::At(g)).unwrap().spread.mean;
        assert!(at("without_best") <= at("without_random") && at("without_random") <= at("without_worst"));
    }
}

#[test]
fn identical_datasets_are_interchangeable() {
    let t = generate(&preset("overlap-a", 77).unwrap()).unwrap();
    let c = cfg("scenario = cross_dataset\ndataset.0.path = x\ndataset.1.path = y\nn = 1000\ntrials = 10\nseed = 5\nreport_g = 100\n");
    let out = experiments::run_on(&c, &[t.clone(), t]).unwrap();
    let a = out.summary_at("x", "x", "", ReportG::At(100)).unwrap().spread;
    let b = out.summary_at("x", "y", "", ReportG::At(100)).unwrap().spread;
    let spread = (a.max - a.min).max(b.max - b.min);
    assert!((a.mean - b.mean).abs() <= spread, "{a:?} vs {b:?}");
}

#[test]
fn remainder_runs_surface_switches() {
    let c = cfg(
        "scenario = remainder\ndataset.0.preset = rockyou-like\ndataset.1.preset = heavy-tail-1m\nn = 10000\ntrials = 5\nseed = 3\nunit = probability\nreport_g = 10, 100, 1000\n",
    );
    let out = experiments::run(&c).unwrap();
    assert_eq!(out.ranking.len(), 2 * 5 * 3);
    assert!(out.audits.iter().all(|a| a.conserved));
    assert_eq!(out.audits.len(), 10);
    // frozen from the pinned seed: best-source identity changes along the curves
    assert_eq!(out.crossovers.len(), 10);
}
