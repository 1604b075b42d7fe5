//! Zero-shot word sense disambiguation and gloss domain labelling.
//!
//! Word senses are mapped to coarse domains through a [`DomainInventory`].
//! Each candidate domain is verbalised into a hypothesis with a
//! [`PromptTemplate`], and a sentence-pair scorer (entailment or next-sentence
//! prediction) rates the hypothesis against the context or gloss. The most
//! probable domain wins.
//!
//! ```no_run
//! use domwsd::{lexicon, prompts, scoring, wsd, DomainInventory, Lexicon};
//!
//! # fn main() -> Result<(), Box<dyn std::error::Error>> {
//! let lex = Lexicon::load("lexicon.tsv")?;
//! let data = lexicon::load_wsd_dataset("semeval2015.jsonl", &lex)?;
//! let inv = DomainInventory::load("csi.tsv", "csi", None)?;
//! let template = prompts::find_template("wsd_word", &[])?;
//! let scorer = scoring::Scorer::from_config(&scoring::ScorerConfig::remote("http://localhost:8000"))?;
//! let run = wsd::Disambiguator::new(&inv, &template, &scorer).run(&data)?;
//! println!("{} predictions", run.predictions.len());
//! # Ok(()) }
//! ```

pub mod domain_labelling;
pub mod eval;
pub mod inventory;
pub mod lexicon;
pub mod metadata;
pub mod pipeline;
pub mod prompts;
pub mod scoring;
pub mod wsd;

pub use inventory::{CandidateDomains, DomainInventory, DomainLabel};
pub use lexicon::{GlossLabelInstance, Lexicon, Pos, Synset, SynsetId, WsdInstance};
pub use prompts::{Hypothesis, PromptTemplate};
pub use scoring::{ScoreMode, ScoreRequest, Scorer, ScorerConfig};
pub use domain_labelling::{DlPrediction, HintsMode};
pub use eval::{CorrelationReport, EvalReport};
pub use metadata::RunMetadata;
pub use pipeline::{RunManifest, RunOptions};
pub use wsd::{WsdPrediction, WsdRun};
