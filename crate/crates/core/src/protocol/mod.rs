//! FSL-SAGE: clients, the S-server (server-side model and alignment) and
//! the F-server (client-model averaging).

mod client;
mod run;
mod server;
mod store;

pub use client::{client_local_round, local_round_with, ClientState, LocalSchedule};
pub use run::{run_fsl_sage, run_fsl_sage_in};
pub use server::{
    aggregate_refs, align_auxiliary, alignment_loss, backward_targets, fserver_aggregate, server_update,
    AlignmentOutcome, ServerState,
};
pub use store::{AlignmentStore, RecordOrigin, SmashedRecord};

pub(crate) use run::charge;
