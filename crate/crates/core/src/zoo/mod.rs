//! Hyperparameter sweeps and zoo generation.
//!
//! A zoo directory holds `zoo.json` (dataset, base architecture, generation
//! settings), `manifest.jsonl` (one [`ZooRecord`] per line, ordered by model
//! id) and `checkpoints/<model_id>.wzoo`.

mod checkpoint;
mod collection;
mod hyper;
mod record;
mod train;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, layer_entries, read_checkpoint, write_checkpoint, Checkpoint,
    CheckpointHeader, LayerEntry, CHECKPOINT_VERSION, MAGIC,
};
pub(crate) use checkpoint::canonical_json;
pub use collection::{
    build_zoo, check_one_seed_per_config, read_records, split_file, split_zoo, BuildConfig, ZooCollection,
    CHECKPOINT_DIR, MANIFEST_FILE, META_FILE,
};
pub use hyper::{sample_hyperparams, HyperParams, ACTIVATIONS, INIT_VARIANCE_RANGE, L2_RANGE, LEARNING_RATE_RANGE};
pub use record::{model_id, GenerationConfig, Metrics, Status, ZooMeta, ZooRecord, ZOO_FORMAT_VERSION};
pub use train::{train_one, TrainOutcome, DEFAULT_BATCH_SIZE};
