//! Run trace: one record per train / fine-tune / selection / data-read event.
//!
//! The trace is how validation and test accesses are audited. Every function
//! that reads a validation or test split takes a `&Trace` and records the read.

use std::sync::Mutex;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataSplit {
    Train,
    Validation,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Training,
    Generation,
    Election,
    Selection,
    WeightOptimization,
    Evaluation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum TraceEvent {
    Train {
        model_id: String,
        generation: u32,
        epochs: u32,
    },
    FineTune {
        model_id: String,
        epochs: u32,
    },
    Select {
        stage: Stage,
        model_ids: Vec<String>,
    },
    DataRead {
        split: DataSplit,
        stage: Stage,
        purpose: String,
    },
}

#[derive(Debug, Default)]
pub struct Trace {
    events: Mutex<Vec<TraceEvent>>,
}

impl Trace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, event: TraceEvent) {
        self.events.lock().expect("trace lock poisoned").push(event);
    }

    pub fn read(&self, split: DataSplit, stage: Stage, purpose: impl Into<String>) {
        self.record(TraceEvent::DataRead {
            split,
            stage,
            purpose: purpose.into(),
        });
    }

    pub fn events(&self) -> Vec<TraceEvent> {
        self.events.lock().expect("trace lock poisoned").clone()
    }

    pub fn len(&self) -> usize {
        self.events.lock().expect("trace lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Count reads of `split`, optionally restricted to one stage.
    pub fn count_reads(&self, split: DataSplit, stage: Option<Stage>) -> usize {
        count_reads(&self.events(), split, stage)
    }

    /// One JSON object per line.
    pub fn to_jsonl(&self) -> serde_json::Result<String> {
        let mut out = String::new();
        for event in self.events() {
            out.push_str(&serde_json::to_string(&event)?);
            out.push('\n');
        }
        Ok(out)
    }
}

pub fn count_reads(events: &[TraceEvent], split: DataSplit, stage: Option<Stage>) -> usize {
    events
        .iter()
        .filter(|e| match e {
            TraceEvent::DataRead { split: s, stage: st, .. } => {
                *s == split && stage.is_none_or(|want| want == *st)
            }
            _ => false,
        })
        .count()
}

/// Number of validation-set reads recorded in a run trace.
pub fn count_validation_queries(events: &[TraceEvent]) -> usize {
    count_reads(events, DataSplit::Validation, None)
}

/// Test reads made by any stage other than evaluation. Must be zero.
pub fn test_reads_outside_evaluation(events: &[TraceEvent]) -> usize {
    events
        .iter()
        .filter(|e| {
            matches!(e, TraceEvent::DataRead { split: DataSplit::Test, stage, .. }
                if *stage != Stage::Evaluation)
        })
        .count()
}
