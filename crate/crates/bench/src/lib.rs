//! Fixtures shared by the streaming benchmarks in `benches/`.

use freqsep_core::{make_synthetic_scenario, Difficulty, PlantSim, Result, Scheduler};

/// Plant and scheduler wired together one sample at a time.
pub struct SampleLoop {
    plant: PlantSim,
    sched: Scheduler,
}

impl SampleLoop {
    pub fn new(seed: u64, difficulty: Difficulty) -> Result<Self> {
        let sc = make_synthetic_scenario(seed, difficulty);
        Ok(Self {
            plant: PlantSim::new(&sc)?,
            sched: Scheduler::new(sc.build_bank()?, sc.schedule.clone(), sc.plants.len())?,
        })
    }

    /// Advances one sample and returns the residual error.
    pub fn step(&mut self) -> Result<f64> {
        let d = self.plant.next_disturbance();
        let out = self.sched.control(d.a)?;
        let e = self.plant.respond(&d, &out.u)?;
        self.sched.observe(e)?;
        Ok(e)
    }
}

/// Deterministic broadband test signal.
pub fn chirp(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let t = k as f64 / n as f64;
            (std::f64::consts::PI * 0.5 * n as f64 * t * t).sin()
        })
        .collect()
}
