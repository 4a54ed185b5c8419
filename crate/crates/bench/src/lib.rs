//! Fixtures shared by the benchmarks: a small traced corpus and a model
//! sized like the desk configuration.

use ligerlab::datasets::{gen_corpus, trace_corpus, Corpus, CorpusSpec};
use ligerlab::embedder::{EncodedProgram, Liger, ModelConfig, Vocab};
use ligerlab::minilang::Program;
use ligerlab::trace_model::ProgramTraces;

pub struct Fixture {
    pub corpus: Corpus,
    pub programs: Vec<Program>,
    pub store: Vec<ProgramTraces>,
    pub model: Liger,
    pub encoded: Vec<EncodedProgram>,
}

/// `variants` programs per class, traced with the corpus budget, and an
/// untrained classifier of width `hidden`.
pub fn fixture(variants: usize, hidden: usize) -> Fixture {
    let spec = CorpusSpec { variants_per_label: variants, ..CorpusSpec::classification(9) };
    let corpus = gen_corpus(&spec).expect("corpus generates");
    let store = trace_corpus(&corpus, &spec.budget(), 9).expect("corpus traces").store;
    let programs = corpus.programs().expect("sources parse");
    let cfg = ModelConfig { hidden, embed: hidden, n_eps: spec.n_eps, max_paths: spec.max_paths, labels: spec.labels.len(), ..ModelConfig::default() };
    let model = Liger::new(cfg, Vocab::build(&programs), 9).expect("valid config");
    let index = |id: &str| corpus.manifest.entries.iter().position(|e| e.program_id == id).expect("traced program is in the manifest");
    let encoded = store
        .iter()
        .map(|t| EncodedProgram::from_traces(&model.vocab, &programs[index(&t.program_id)], t, &model.config).expect("encodes"))
        .collect();
    Fixture { corpus, programs, store, model, encoded }
}
