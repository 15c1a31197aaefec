use crp_core::energy::{EnergyParams, KinematicsConfig};
use crp_core::evolve::*;
use crp_core::instance::{generate_training_set, GeneratedKind};
use crp_core::priority::{TreePriority, GrhPriority};
use crp_core::scheme::Scheme;

fn main() {
    let energy = EnergyParams::default();
    let kin = KinematicsConfig::default();
    let train = generate_training_set(GeneratedKind::CasertaLike, 50, 1001);
    let test = generate_training_set(GeneratedKind::CasertaLike, 100, 2002);
    let scheme = Scheme::Restricted;
    let env = FitnessEnv { instances: &train, scheme, energy: &energy, kinematics: &kin };
    let test_env = FitnessEnv { instances: &test, scheme, energy: &energy, kinematics: &kin };
    let config = RunConfig::new(scheme, 42); // pop 1000, 50k evals
    let g = evolve(&GpRepresentation::default(), &config, &env).unwrap();
    println!("full-scale GP-R: train {:.0} test {:.0}", g.best.fitness,
        test_env.fitness(&TreePriority::new(g.best.genome.clone())).unwrap());
    let gs: Vec<_> = g.log.samples().iter().step_by(10).map(|(e,f)| format!("{e}:{f:.0}")).collect();
    println!("  conv: {}", gs.join(" "));
    let h = evolve(&GrhRepresentation::default(), &config, &env).unwrap();
    println!("full-scale GRH-R: train {:.0} test {:.0}", h.best.fitness,
        test_env.fitness(&GrhPriority::new(h.best.genome)).unwrap());
}
