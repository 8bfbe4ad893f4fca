//! Synthetic cold-start comparison: `cargo run --release --example cold_start -- [seed] [epochs_p2v] [epochs_mp2v] [dim]`

use std::time::Instant;

use mp2v::pipeline::{train_split, tune_alpha, EvalData, Mode};
use mp2v::synthetic::{generate, SyntheticSpec};
use mp2v_core::corpus::Phase;
use mp2v_core::metrics::EvalConfig;
use mp2v_core::scorer::Mix;
use mp2v_core::train::HyperParams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<u64> = std::env::args().skip(1).map(|a| a.parse().unwrap()).collect();
    let seed = args.first().copied().unwrap_or(1);
    let e_p2v = args.get(1).copied().unwrap_or(10) as usize;
    let e_mp2v = args.get(2).copied().unwrap_or(5) as usize;
    let dim = args.get(3).copied().unwrap_or(32) as usize;
    let t = Instant::now();
    let env = |k: &str, d: f64| std::env::var(k).ok().map_or(d, |v| v.parse().unwrap());
    let spec = SyntheticSpec {
        seed,
        items_per_category: env("IPC", 150.0) as usize,
        zipf_exponent: env("ZIPF", 1.0),
        stay: env("STAY", 0.8),
        noise: env("NOISE", 0.0),
        cold_fraction: env("COLD", 1.0),
        sessions: env("SESSIONS", 10000.0) as usize,
        ..SyntheticSpec::default()
    };
    let corpus = generate(&spec)?;
    let meta = [corpus.metadata()];
    let eval = EvalConfig {
        k_list: vec![20],
        bootstrap_samples: 0,
        ..EvalConfig::default()
    };
    let base = HyperParams {
        dim,
        min_count: 1,
        seed,
        ..HyperParams::default()
    };
    for phase in [Phase::Tuning, Phase::Final] {
        let data = EvalData::new(&corpus.sessions, phase, 1, base.window)?;
        let co = data.cocounts(Default::default());
        println!(
            "{phase:?} cocounts {:?}  bestof {:?}",
            data.evaluate(&co, &eval)?.hr(20),
            data.evaluate(&data.best_of(), &eval)?.hr(20)
        );
        for (mode, epochs) in [(Mode::Prod2vec, e_p2v), (Mode::Metaprod2vec, e_mp2v)] {
            let params = HyperParams { epochs, ..base.clone() };
            let tr = train_split(&data.split, &meta, &params, mode.kinds())?;
            let emb = data.embedding_scorer(mode.slug(), tr.vocab.tokens(), &tr.model);
            let r = data.evaluate(&emb, &eval)?;
            let (alpha, _) = tune_alpha(
                &emb,
                &co,
                &data.cases,
                &(0..=20).map(|i| i as f64 * 0.05).collect::<Vec<_>>(),
                20,
                500,
            )?;
            let mix = Mix::new("mix", alpha, &emb, &co, 500)?;
            let rm = data.evaluate(&mix, &eval)?;
            println!(
                "{phase:?} {} hr20 {:.5} freq0 {:?} mix(alpha {alpha}) {:.5}  [{:.1}s] last loss {:?}",
                mode.slug(),
                r.hr(20).unwrap(),
                r.bucket_hr(0, 20),
                rm.hr(20).unwrap(),
                t.elapsed().as_secs_f64(),
                tr.log.last().map(|l| &l.mean_loss)
            );
        }
    }
    Ok(())
}
