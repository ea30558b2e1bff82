use std::collections::BTreeMap;
use std::path::Path;

use roboprep::augment::AugmentConfig;
use roboprep::synth::{
    corpus, fixture_filter_config, fixture_qa_config, fixture_sampler, FixtureEmbodiment,
    FIXTURE_REFERENCE_FLOW,
};
use roboprep::unify::UnifiedLayout;
use roboprep::{Episode, Error, Result};
use serde_json::json;

use crate::io::{save_all, write_json};

/// Writes `episodes/`, `embodiments/`, the layout and every config a
/// pipeline run needs, plus `expected_violations.json` naming the reject
/// reason each defective episode was built to trigger.
pub fn generate(out: &Path, seed: u64, n: usize) -> Result<()> {
    if n < 9 {
        return Err(Error::Domain(format!(
            "--n {n} is too small to hold one violator per filter (9)"
        )));
    }
    let fixtures = corpus(n, seed, true);
    let eps: Vec<Episode> = fixtures.iter().map(|f| f.episode.clone()).collect();
    save_all(&eps, &out.join("episodes"))?;
    for e in FixtureEmbodiment::ALL {
        write_json(
            &out.join("embodiments").join(format!("{}.json", e.id())),
            &e.descriptor().to_file_struct(),
        )?;
    }
    write_json(
        &out.join("layout.json"),
        &UnifiedLayout::default_layout().to_file_struct(),
    )?;
    write_json(&out.join("filter.json"), &fixture_filter_config())?;
    write_json(&out.join("qa.json"), &fixture_qa_config())?;
    write_json(&out.join("sampler.json"), &fixture_sampler(seed))?;
    write_json(&out.join("augment.json"), &AugmentConfig::default())?;
    write_json(
        &out.join("align.json"),
        &json!({"reference_flow": FIXTURE_REFERENCE_FLOW, "pair_budget": 8}),
    )?;
    write_json(
        &out.join("pipeline.json"),
        &json!({
            "episodes": "episodes",
            "layout": "layout.json",
            "descriptors": "embodiments",
            "qa": "qa.json",
            "filter": "filter.json",
            "sampler": "sampler.json",
            "augment": "augment.json",
            "reference_flow": FIXTURE_REFERENCE_FLOW,
        }),
    )?;
    let expected: BTreeMap<&str, &str> = fixtures
        .iter()
        .filter_map(|f| Some((f.episode.id.as_str(), f.violation?.reason_name())))
        .collect();
    write_json(&out.join("expected_violations.json"), &expected)?;
    eprintln!(
        "gen-fixtures: {} episodes ({} with a defect) under {}",
        eps.len(),
        expected.len(),
        out.display()
    );
    Ok(())
}
