use alloc::vec::Vec;

use super::client::client_local_round;
use super::server::{align_auxiliary, fserver_aggregate, ServerState};
use super::store::SmashedRecord;
use crate::config::RunConfig;
use crate::error::Result;
use crate::metrics::{estimation_error, Channel, CommEvent, CommLedger, Direction};
use crate::sim::{budget_spent, Environment, RunReport};

pub(crate) fn charge(
    ledger: &mut CommLedger,
    round: usize,
    direction: Direction,
    channel: Channel,
    client: usize,
    scalars: u64,
) {
    ledger.charge(CommEvent {
        round,
        direction,
        channel,
        client,
        scalars,
    });
}

/// Result of the alignment phase at the start of a round.
struct AlignmentPhase {
    epsilon_pre: f64,
    epsilon_post: f64,
    mean_loss: f64,
}

pub fn run_fsl_sage(config: &RunConfig) -> Result<RunReport> {
    let env = Environment::build(config)?;
    run_fsl_sage_in(&env, config)
}

/// Per round `t`:
/// 1. if `t ≡ 0 (mod l)` and `t ≤ T′`, the S-server aligns each client's
///    auxiliary model on its store and sends it down (clients whose store
///    is still empty keep theirs);
/// 2. the F-server broadcasts `x_c`;
/// 3. every client runs `K` local steps with auxiliary feedback, uplinking
///    `Q` smashed records;
/// 4. the S-server consumes records slot by slot, ascending client id;
/// 5. clients upload `x_{c,i}` and the F-server averages them.
pub fn run_fsl_sage_in(env: &Environment, config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    let bundle = &env.bundle;
    let sched = &config.schedule;
    let optim = &config.optim;
    let m = sched.clients;
    let client_size = bundle.client_init.len() as u64;
    let aux_size = bundle.aux_init.len() as u64;

    let mut clients = env.client_states(config);
    let mut server = ServerState::new(bundle.server_init.clone(), m, config.protocol.store_capacity);
    let mut global = bundle.client_init.clone();
    let mut ledger = CommLedger::new();
    let mut rows = Vec::with_capacity(sched.rounds);

    for t in 0..sched.rounds {
        let mut phase = None;
        if sched.aligns_at(t) && server.stores.iter().any(|s| !s.is_empty()) {
            let epsilon_pre = estimation_error(bundle, &clients, &server, &env.estimation_probe)?;
            let mut loss_sum = 0.0;
            let mut aligned = 0usize;
            for c in clients.iter_mut() {
                let store = &server.stores[c.id];
                if store.is_empty() {
                    continue;
                }
                let out = align_auxiliary(
                    &bundle.aux_spec,
                    &bundle.server_spec,
                    &c.aux_params,
                    store,
                    &server.params,
                    optim.align_steps,
                    optim.align_lr,
                )?;
                c.aux_params = out.params;
                loss_sum += out.loss_after;
                aligned += 1;
                charge(&mut ledger, t, Direction::Down, Channel::Aux, c.id, aux_size);
            }
            let epsilon_post = estimation_error(bundle, &clients, &server, &env.estimation_probe)?;
            phase = Some(AlignmentPhase {
                epsilon_pre,
                epsilon_post,
                mean_loss: loss_sum / aligned as f64,
            });
        }

        for c in clients.iter_mut() {
            c.client_params.clone_from(&global);
            charge(&mut ledger, t, Direction::Down, Channel::Model, c.id, client_size);
        }

        let mut outboxes = Vec::with_capacity(m);
        for c in clients.iter_mut() {
            let sent = client_local_round(
                c,
                bundle,
                &env.train,
                sched.local_steps,
                sched.uplinks_per_round,
                optim.client_lr,
                t,
            )?;
            for r in &sent {
                charge(&mut ledger, t, Direction::Up, Channel::Smashed, c.id, r.wire_scalars());
            }
            outboxes.push(sent.into_iter());
        }
        process_canonical(
            &mut server,
            &bundle.server_spec,
            &mut outboxes,
            sched.uplinks_per_round,
            optim.server_lr,
        )?;

        for c in &clients {
            charge(&mut ledger, t, Direction::Up, Channel::Model, c.id, client_size);
        }
        let uploads: Vec<_> = clients.iter().map(|c| c.client_params.clone()).collect();
        global = fserver_aggregate(&uploads)?;
        for c in clients.iter_mut() {
            c.client_params.clone_from(&global);
        }

        let mut row = env.measure(t, &global, &server.params, &ledger, Some((&clients, &server)))?;
        if let Some(p) = phase {
            row.alignment_loss = Some(p.mean_loss);
            row.epsilon_pre_align = Some(p.epsilon_pre);
            row.epsilon_post_align = Some(p.epsilon_post);
        }
        rows.push(row);
        if budget_spent(config, &ledger) {
            break;
        }
    }

    Ok(RunReport {
        rows,
        ledger,
        final_client: global,
        final_server: server.params,
        final_aux: clients.into_iter().map(|c| c.aux_params).collect(),
    })
}

/// Feeds the S-server uplink slot by slot (`q = 0..Q`), ascending client id
/// within a slot.
pub(crate) fn process_canonical<I>(
    server: &mut ServerState,
    server_spec: &crate::numcore::MlpSpec,
    outboxes: &mut [I],
    uplinks: usize,
    eta: f64,
) -> Result<()>
where
    I: Iterator<Item = SmashedRecord>,
{
    for _ in 0..uplinks {
        for outbox in outboxes.iter_mut() {
            if let Some(rec) = outbox.next() {
                server.sserver_process(server_spec, rec, eta)?;
            }
        }
    }
    Ok(())
}
