//! Random data-free models run by the engine and by the oracle under the
//! same random choice of which enabled task completes next.

use flowledger_core::ledger::AccountId;
use flowledger_oracle::gen::random_model;
use flowledger_oracle::xml::to_xml;
use flowledger_oracle::Sim;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::common::Engine;
use super::same;

pub struct Summary {
    pub models: usize,
    pub runs: usize,
    pub steps: usize,
}

/// `models` random models, `runs` interleavings each, all on one ledger.
pub fn run(seed: u64, models: usize, runs: usize) -> Result<Summary, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let engine = Engine::new();
    let actor = AccountId::new("worker");
    let mut steps = 0;
    for m in 0..models {
        let model = random_model(&mut rng);
        let xml = to_xml(&model);
        let dep = engine.register(&xml);
        for r in 0..runs {
            let at = |s: usize| format!("model {m} run {r} step {s}");
            let case = engine.start(dep.root_flow());
            let mut sim = Sim::start(&model);
            for s in 0.. {
                let want: Vec<String> = sim.enabled().into_iter().map(|t| t.id).collect();
                let got = dep.enabled_ids(&engine, case);
                same(&format!("{}: enabled\n{xml}", at(s)), &got, &want)?;
                same(
                    &format!("{}: completed\n{xml}", at(s)),
                    engine.view(case).completed,
                    sim.is_completed(),
                )?;
                if want.is_empty() {
                    break;
                }
                let pick = want[rng.gen_range(0..want.len())].clone();
                let item = dep.item(&engine, case, &pick);
                engine
                    .check_in(&actor, item.case, item.e_ind, &[])
                    .map_err(|e| format!("{}: check-in {pick}: {}", at(s), e.reason))?;
                let t = sim.enabled().into_iter().find(|t| t.id == pick).unwrap();
                sim.complete(&t, None)?;
                steps += 1;
            }
            same(
                &format!("model {m} run {r}: terminates"),
                sim.is_completed(),
                true,
            )?;
        }
    }
    Ok(Summary {
        models,
        runs,
        steps,
    })
}
