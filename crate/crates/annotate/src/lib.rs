//! Annotation service: serves a day's images in chronological order, takes
//! chunk labels and privacy deletions, and exports the edited manifest.

mod error;
mod server;
mod session;

pub use error::{AnnotateError, Result};
pub use server::{router, serve, AppState, THUMBNAIL_SIDE};
pub use session::{
    AnnotationSession, AuditAction, AuditEntry, ChunkRange, DeleteOutcome, DeleteStatus,
    ImageDescriptor,
};
