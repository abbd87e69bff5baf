//! Scratch probe for benchmark tuning (not part of the test suite).

use anomid_core::eval::{run_benchmark, BenchmarkConfig, Method};
use anomid_core::lstm::LstmTrainConfig;
use anomid_core::sim::{generate_dataset, DatasetConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let runs: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(2);
    let epochs: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(100);
    let with_lstm: bool = args.get(3).map(|s| s == "lstm").unwrap_or(false);

    let dataset = generate_dataset(&DatasetConfig::default()).unwrap();
    let mut methods = vec![Method::Hmm, Method::CrfLbfgs, Method::CrfArow];
    if with_lstm {
        methods.push(Method::Lstm);
    }
    let config = BenchmarkConfig {
        methods,
        runs,
        lstm: LstmTrainConfig {
            epochs,
            ..LstmTrainConfig::default()
        },
        ..BenchmarkConfig::default()
    };
    let t0 = std::time::Instant::now();
    let result = run_benchmark(&dataset, &config).unwrap();
    println!("benchmark took {:.1}s", t0.elapsed().as_secs_f64());
    for r in &result.reports {
        println!(
            "\n{}  (runs {})  overall F {:.3}+/-{:.3}  anomaly F {:.3}+/-{:.3}",
            r.method,
            r.runs_completed,
            r.overall_macro.f_score.mean,
            r.overall_macro.f_score.std,
            r.overall_anomaly.f_score.mean,
            r.overall_anomaly.f_score.std
        );
        let names = ["safe", "loc", "dis", "unb"];
        for c in 0..4 {
            let m = &r.per_class[c];
            println!(
                "  {:<5} P {:.3}+/-{:.3} R {:.3}+/-{:.3} F {:.3}+/-{:.3}",
                names[c],
                m.precision.mean,
                m.precision.std,
                m.recall.mean,
                m.recall.std,
                m.f_score.mean,
                m.f_score.std
            );
        }
        println!("  case confusion (rows loc/dis/unb, cols loc/dis/unb + safe spill):");
        for g in 0..3 {
            println!(
                "    {:?} spill {}",
                r.case_confusion[g], r.case_safe_spill[g]
            );
        }
        for (run, err) in &r.failed_runs {
            println!("  run {run} FAILED: {err}");
        }
        for (run, curve) in &r.curves {
            let first = curve.first().unwrap();
            let last = curve.last().unwrap();
            println!(
                "  run {run} curve: loss {:.4} -> {:.4}, F {:.3} -> {:.3}",
                first.loss, last.loss, first.f_score, last.f_score
            );
        }
    }
}
