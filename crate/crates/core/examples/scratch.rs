use qloss::fit::LossKind;
use qloss::fqi::{run_fqi, BatchDataset, FqiConfig};
use qloss::pendulum::*;
use qloss::seeding;

fn main() {
    for order in [2usize, 3] {
        for &l2 in &[3.0, 10.0, 30.0, 100.0] {
            for &size in &[400usize, 1000] {
                let mut total = 0.0;
                let reps = 6;
                for rep in 0..reps {
                    let child = seeding::derive(91, &[rep as u64]);
                    let data = BatchDataset::collect(size, seeding::derive(child, &[0]));
                    let mut config = FqiConfig::new(LossKind::Squared);
                    config.feature_order = order;
                    config.l2 = l2;
                    let (policy, _) = run_fqi(&data, &config).unwrap();
                    total +=
                        evaluate_policy(|s| policy.act(s), 3000, 20, seeding::derive(child, &[1]));
                }
                println!(
                    "sq order={order} l2={l2} size={size}: mean failure {:.3}",
                    total / reps as f64
                );
            }
        }
    }
}
