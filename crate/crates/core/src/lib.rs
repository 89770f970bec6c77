//! Joint many-task model: POS tagging, chunking, dependency parsing,
//! semantic relatedness and textual entailment from one stack of
//! bi-LSTM layers, each task at its own depth.

pub mod archive;
pub mod data;
pub mod dep;
pub mod embedding;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod graph;
pub mod init;
pub mod iobes;
pub mod model;
pub mod params;
pub mod semantic;
pub mod skipgram;
pub mod synthetic;
pub mod taggers;
pub mod task;
pub mod tensor;
pub mod trainer;
pub mod vocab;

pub use archive::{load_model, save_model};
pub use data::{Corpus, EntailmentLabel, Sentence, SentencePair, Token};
pub use embedding::TokenVectors;
pub use encoder::LayerWiring;
pub use error::{DataError, Error, GraphError, Result};
pub use eval::{Metric, MetricReport};
pub use graph::{Graph, NodeId};
pub use model::{DropoutRates, JointModel, Labels, ModelConfig};
pub use params::{ParamId, ParamKind, ParamStore};
pub use task::{Task, TaskSet};
pub use tensor::Tensor;
pub use trainer::{TaskOrder, TrainConfig, Trainer};
pub use vocab::Vocabulary;
