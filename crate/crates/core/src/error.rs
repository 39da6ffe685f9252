use std::io;

use crate::node::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: rejected record: {reason}")]
    RejectedRecord { line: usize, reason: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("nothing to train: the exposure table is empty")]
    NothingToTrain,

    #[error("evaluation data references {} node(s) missing from the model: {}", .missing.len(), preview(.missing))]
    EvaluationDomain { missing: Vec<NodeId> },

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("toml: {0}")]
    TomlDe(#[from] toml::de::Error),

    #[error("toml: {0}")]
    TomlSer(#[from] toml::ser::Error),
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) | Error::TomlDe(_) | Error::TomlSer(_) => 2,
            Error::Diverged { .. } => 4,
            _ => 3,
        }
    }
}

fn preview(nodes: &[NodeId]) -> String {
    const SHOWN: usize = 10;
    let mut s = nodes
        .iter()
        .take(SHOWN)
        .map(NodeId::as_str)
        .collect::<Vec<_>>()
        .join(", ");
    if nodes.len() > SHOWN {
        s.push_str(", ...");
    }
    s
}
