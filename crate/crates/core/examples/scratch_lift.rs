use metasel_core::cv::CvConfig;
use metasel_core::forest::ForestConfig;
use metasel_core::ga::{evolve, mask_fitness, GaConfig};
use metasel_core::synth::{generate, SynthConfig};
use metasel_core::Mask;
fn main() {
    let args: Vec<String> = std::env::args().collect();
    let effect: f64 = args[1].parse().unwrap();
    let n: usize = args[2].parse().unwrap();
    let trees: usize = args[3].parse().unwrap();
    let run_ga = args.len() > 4;
    let forest = ForestConfig {
        n_trees: trees,
        ..Default::default()
    };
    let cv = CvConfig::default();
    let mut lifts = 0;
    for seed in 0..10u64 {
        let t = std::time::Instant::now();
        let _ = effect;
        let mut pick = None;
        for step in 2..=20 {
            let e = step as f64 * 0.05;
            let data = generate(&SynthConfig::single_site(n, 62, 6, e, seed)).unwrap();
            let base = mask_fitness(&data.table, &Mask::ones(62), &forest, &cv, seed)
                .unwrap()
                .mean;
            let gap = (base - 0.55).abs();
            if pick
                .as_ref()
                .is_none_or(|(g, ..): &(f64, f64, f64, _)| gap < *g)
            {
                pick = Some((gap, e, base, data));
            }
        }
        let (_, e, base, data) = pick.unwrap();
        print!("e {e:.2} ");
        let truth = mask_fitness(&data.table, &data.truth_mask, &forest, &cv, seed)
            .unwrap()
            .mean;
        let mut line = format!("seed {seed} base {base:.3} truth {truth:.3}");
        if run_ga {
            let ga = GaConfig {
                n_pop: std::env::var("NPOP").map_or(60, |v| v.parse().unwrap()),
                n_iter: std::env::var("NITER").map_or(15, |v| v.parse().unwrap()),
                seed,
                ..Default::default()
            };
            let r = evolve(&data.table, &ga, &forest, &cv).unwrap();
            let lift = r.best_fitness.mean - base;
            if lift >= 0.10 {
                lifts += 1;
            }
            line += &format!(
                " ga {:.3} lift {lift:.3} ones {}",
                r.best_fitness.mean,
                r.best_mask.count_ones()
            );
        }
        println!("{line} {:.1}s", t.elapsed().as_secs_f64());
    }
    println!("lifts {lifts}");
}
