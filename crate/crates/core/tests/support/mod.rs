//! Independent oracles shared by the integration tests and the acceptance run.

#![allow(dead_code)]

use equitrust_core::metrics::{
    collusion_power, completion_cdf, fairness_index, naul, time_avg_welfare, FairnessAccumulator, NaulAccumulator,
    WelfareAccumulator,
};
use equitrust_core::reputation::{brs_score, Aggregation, BetaEvidence, ReputationLedger};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Reduced fraction `(num, den)` with a positive denominator.
pub fn reduce(num: i128, den: i128) -> (i128, i128) {
    let g = gcd(num, den).max(1);
    let s = if den < 0 { -1 } else { 1 };
    (s * num / g, s * den / g)
}

fn add(a: (i128, i128), b: (i128, i128)) -> (i128, i128) {
    reduce(a.0 * b.1 + b.0 * a.1, a.1 * b.1)
}

fn binom(n: i128, k: i128) -> i128 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Exact value of the integral of x^m (1-x)^k over [0, 1], by binomial expansion.
pub fn beta_integral(m: i128, k: i128) -> (i128, i128) {
    (0..=k).fold((0, 1), |acc, j| {
        let sign = if j % 2 == 0 { 1 } else { -1 };
        add(acc, reduce(sign * binom(k, j), m + j + 1))
    })
}

/// Mean of the posterior Beta(r + 1, s + 1), computed as a ratio of integrals.
pub fn beta_mean_oracle(r: u64, s: u64) -> (i128, i128) {
    let (r, s) = (r as i128, s as i128);
    let num = beta_integral(r + 1, s);
    let den = beta_integral(r, s);
    reduce(num.0 * den.1, num.1 * den.0)
}

/// Every boolean sequence of length at most `max_len`.
pub fn all_sequences(max_len: usize) -> Vec<Vec<bool>> {
    let mut out = Vec::new();
    for len in 0..=max_len {
        for bits in 0u32..(1 << len) {
            out.push((0..len).map(|i| bits >> i & 1 == 1).collect());
        }
    }
    out
}

/// Checks the score of every sequence of length ≤ `max_len` against the
/// integral oracle, both as a rational and bit for bit as a float.
pub fn check_brs_exhaustive(max_len: usize) -> Result<usize, String> {
    let seqs = all_sequences(max_len);
    for seq in &seqs {
        let mut ev = BetaEvidence::default();
        let mut ledger = ReputationLedger::new(Aggregation::Pooled);
        for &x in seq {
            ev.add(x);
            ledger.record_raw(0, 0, 1, x);
        }
        let (num, den) = beta_mean_oracle(ev.positives, ev.negatives);
        let closed = reduce(ev.positives as i128 + 1, ev.total() as i128 + 2);
        if closed != (num, den) {
            return Err(format!("{seq:?}: rational {closed:?} vs oracle {num}/{den}"));
        }
        let oracle = num as f64 / den as f64;
        for (what, got) in [("brs_score", brs_score(ev)), ("ledger", ledger.reputation_of(0, 0))] {
            if got.to_bits() != oracle.to_bits() {
                return Err(format!("{seq:?}: {what} {got} vs oracle {oracle}"));
            }
        }
    }
    Ok(seqs.len())
}

/// Compares streaming accumulators with batch recomputation on `streams`
/// random event streams. Returns a description of the first mismatch.
pub fn check_metric_streams(streams: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in 0..streams {
        let len = rng.random_range(1..300usize);
        let p: f64 = rng.random();
        let outcomes: Vec<bool> = (0..len).map(|_| rng.random::<f64>() < p).collect();

        let mut acc = NaulAccumulator::new(5.0, 1.0);
        let cut = rng.random_range(0..=len);
        let mut tail = NaulAccumulator::new(5.0, 1.0);
        for (i, &o) in outcomes.iter().enumerate() {
            if i < cut {
                acc.push(o);
            } else {
                tail.push(o);
            }
        }
        acc.merge(&tail);
        let batch = naul(&outcomes, 5.0, 1.0).ok_or("naul undefined")?;
        if acc.value() != Some(batch) {
            return Err(format!("stream {s}: naul streaming {:?} vs batch {batch}", acc.value()));
        }
        let succ = outcomes.iter().filter(|&&o| o).count() as f64;
        if (batch - (1.0 - succ / len as f64)).abs() > 1e-12 {
            return Err(format!("stream {s}: naul {batch} vs closed form"));
        }

        let n = rng.random_range(1..40usize);
        let mut fair = FairnessAccumulator::new(n);
        for _ in 0..len {
            fair.add(rng.random_range(0..n), rng.random_range(1..4));
        }
        let batch = fairness_index(&fair.counts);
        if fair.value() != batch {
            return Err(format!("stream {s}: fairness streaming {:?} vs batch {batch:?}", fair.value()));
        }
        let (sum, sq): (u128, u128) = fair.counts.iter().fold((0, 0), |(a, b), &c| (a + c as u128, b + (c as u128).pow(2)));
        let direct = (sum * sum) as f64 / (n as u128 * sq) as f64;
        if (batch.unwrap_or(f64::NAN) - direct).abs() > 1e-12 {
            return Err(format!("stream {s}: fairness {batch:?} vs direct {direct}"));
        }

        let utilities: Vec<f64> = (0..len).map(|_| rng.random_range(-5.0..20.0)).collect();
        let mut w = WelfareAccumulator::default();
        for &u in &utilities {
            w.push(u);
        }
        if w.value() != time_avg_welfare(&utilities) {
            return Err(format!("stream {s}: welfare streaming {:?} vs batch", w.value()));
        }

        let consumers = rng.random_range(1..20usize);
        let each = rng.random_range(1..50u64);
        let tries: Vec<u64> = (0..consumers).map(|_| rng.random_range(0..=each)).collect();
        let mut running = 0u64;
        for &t in &tries {
            running += t;
        }
        let expect = running as f64 / (consumers as f64 * each as f64);
        if collusion_power(&tries, each) != Some(expect) {
            return Err(format!("stream {s}: collusion power mismatch"));
        }

        let horizon = 14;
        let times: Vec<Option<u64>> = (0..len)
            .map(|_| if rng.random::<f64>() < 0.1 { None } else { Some(rng.random_range(1..20)) })
            .collect();
        let cdf = completion_cdf(&times, horizon);
        for x in 1..=horizon {
            let count = times.iter().filter(|t| t.is_some_and(|t| t <= x)).count();
            if cdf.at(x) != Some(count as f64 / len as f64) {
                return Err(format!("stream {s}: cdf at {x}"));
            }
        }

        let mut ledger = ReputationLedger::new(Aggregation::MeanOfLocals);
        let window = if rng.random::<bool>() { Some(rng.random_range(1..10)) } else { None };
        ledger = ledger.with_window(window);
        let trusters = rng.random_range(1..15u32);
        for &o in &outcomes {
            ledger.record_raw(0, 0, rng.random_range(0..trusters), o);
        }
        let locals: Vec<f64> = ledger.iter().filter(|r| r.3.total() > 0).map(|r| r.3.score()).collect();
        let direct = locals.iter().sum::<f64>() / locals.len() as f64;
        if (ledger.reputation_of(0, 0) - direct).abs() > 1e-12 {
            return Err(format!("stream {s}: ledger {} vs recomputed {direct}", ledger.reputation_of(0, 0)));
        }
    }
    Ok(())
}
