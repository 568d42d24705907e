use metasel_core::cv::CvConfig;
use metasel_core::forest::ForestConfig;
use metasel_core::ga::{mask_fitness, GaConfig};
use metasel_core::hier::{run_rounds, HierConfig};
use metasel_core::synth::{generate, SynthConfig};
use metasel_core::Mask;
fn main() {
    let forest = ForestConfig {
        n_trees: 50,
        ..Default::default()
    };
    let cv = CvConfig::default();
    let mut lifts = 0;
    for seed in 0..10u64 {
        let t = std::time::Instant::now();
        let mut pick = None;
        for step in 2..=20 {
            let e = step as f64 * 0.05;
            let data = generate(&SynthConfig::single_site(150, 62, 6, e, seed)).unwrap();
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
        let (_, e, _, data) = pick.unwrap();
        let ga = GaConfig {
            n_pop: 100,
            n_iter: 20,
            seed,
            ..Default::default()
        };
        let h = run_rounds(
            &data.table,
            &ga,
            &forest,
            &cv,
            &HierConfig::default(),
            &mut |_, _| {},
        )
        .unwrap();
        let lift = h.rounds[0].result.mean - h.baseline.mean;
        if lift >= 0.10 {
            lifts += 1;
        }
        let accs: Vec<String> = h
            .rounds
            .iter()
            .map(|r| format!("{:.3}/{}", r.result.mean, r.mask.count_ones()))
            .collect();
        println!(
            "seed {seed} e {e:.2} base {:.3} rounds {:?} conv {} lift {lift:.3} {:.1}s",
            h.baseline.mean,
            accs,
            h.converged,
            t.elapsed().as_secs_f64()
        );
    }
    println!("lifts {lifts}");
}
