//! Comparison algorithms on the same substrate: FedAvg on the whole network,
//! SplitFed with one server copy per client or one shared server, and
//! CSE-FSL (locally trained auxiliary models, averaged every round).

use alloc::vec::Vec;

use crate::config::RunConfig;
use crate::error::Result;
use crate::metrics::{Channel, CommLedger, Direction};
use crate::models::{compose, decompose};
use crate::numcore::{backward, forward, loss_and_grad, sgd_step_in_place, ParamVector, Targets};
use crate::protocol::{charge, fserver_aggregate, local_round_with, server_update, LocalSchedule, ServerState};
use crate::sim::{budget_spent, Environment, RunReport};

/// Where SplitFed keeps its server-side model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitFedMode {
    /// One server copy per client, averaged at the end of every round.
    MultiServer,
    /// A single server updated in client order.
    SingleServer,
}

pub fn run_fedavg(config: &RunConfig) -> Result<RunReport> {
    let env = Environment::build(config)?;
    run_fedavg_in(&env, config)
}

/// Each client trains the composed network for `K` steps at `η_L`; the
/// F-server averages. Traffic is the whole model down and up.
pub fn run_fedavg_in(env: &Environment, config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    let bundle = &env.bundle;
    let sched = &config.schedule;
    let m = sched.clients;
    let (full_spec, mut global) = compose(&config.model, &bundle.client_init, &bundle.server_init)?;
    let size = global.len() as u64;
    let mut streams: Vec<_> = (0..m).map(|i| env.stream(config, i)).collect();
    let mut ledger = CommLedger::new();
    let mut rows = Vec::with_capacity(sched.rounds);

    for t in 0..sched.rounds {
        let mut uploads = Vec::with_capacity(m);
        for (i, stream) in streams.iter_mut().enumerate() {
            charge(&mut ledger, t, Direction::Down, Channel::Model, i, size);
            let mut local = global.clone();
            let b = env.batch_size(config, i);
            for _ in 0..sched.local_steps {
                let (x, y) = stream.sample_batch(&env.shards[i], &env.train, b)?;
                let lg = loss_and_grad(&full_spec, &local, &x, Targets::Classes(&y))?;
                sgd_step_in_place(&mut local, &lg.grad_params, config.optim.client_lr)?;
            }
            charge(&mut ledger, t, Direction::Up, Channel::Model, i, size);
            uploads.push(local);
        }
        global = fserver_aggregate(&uploads)?;
        let (c, s) = decompose(&config.model, &global)?;
        rows.push(env.measure(t, &c, &s, &ledger, None)?);
        if budget_spent(config, &ledger) {
            break;
        }
    }

    let (final_client, final_server) = decompose(&config.model, &global)?;
    Ok(RunReport {
        rows,
        ledger,
        final_client,
        final_server,
        final_aux: Vec::new(),
    })
}

pub fn run_splitfed(config: &RunConfig, mode: SplitFedMode) -> Result<RunReport> {
    let env = Environment::build(config)?;
    run_splitfed_in(&env, config, mode)
}

/// Every local step is a full round trip: smashed data and labels up, the
/// true cut-layer gradient down. Clients step in lockstep, ascending id
/// within a step.
pub fn run_splitfed_in(env: &Environment, config: &RunConfig, mode: SplitFedMode) -> Result<RunReport> {
    config.validate()?;
    let bundle = &env.bundle;
    let sched = &config.schedule;
    let optim = &config.optim;
    let m = sched.clients;
    let client_size = bundle.client_init.len() as u64;
    let cut = config.model.cut_dim() as u64;

    let mut streams: Vec<_> = (0..m).map(|i| env.stream(config, i)).collect();
    let mut global_client = bundle.client_init.clone();
    let mut global_server = bundle.server_init.clone();
    let mut ledger = CommLedger::new();
    let mut rows = Vec::with_capacity(sched.rounds);

    for t in 0..sched.rounds {
        let mut locals: Vec<ParamVector> = Vec::with_capacity(m);
        for i in 0..m {
            charge(&mut ledger, t, Direction::Down, Channel::Model, i, client_size);
            locals.push(global_client.clone());
        }
        let mut copies: Vec<ParamVector> = match mode {
            SplitFedMode::MultiServer => (0..m).map(|_| global_server.clone()).collect(),
            SplitFedMode::SingleServer => Vec::new(),
        };

        for _ in 0..sched.local_steps {
            for i in 0..m {
                let b = env.batch_size(config, i);
                let (x, y) = streams[i].sample_batch(&env.shards[i], &env.train, b)?;
                let trace = forward(&bundle.client_spec, &locals[i], &x)?;
                let z_f = trace.output();
                let rows_b = z_f.rows() as u64;
                charge(
                    &mut ledger,
                    t,
                    Direction::Up,
                    Channel::Smashed,
                    i,
                    rows_b * cut + rows_b,
                );
                let server = match mode {
                    SplitFedMode::MultiServer => &mut copies[i],
                    SplitFedMode::SingleServer => &mut global_server,
                };
                let lg = server_update(&bundle.server_spec, server, z_f, &y, optim.server_lr)?;
                charge(&mut ledger, t, Direction::Down, Channel::Gradient, i, rows_b * cut);
                let (g, _) = backward(&bundle.client_spec, &locals[i], &trace, &lg.grad_inputs)?;
                sgd_step_in_place(&mut locals[i], &g, optim.client_lr)?;
            }
        }

        for i in 0..m {
            charge(&mut ledger, t, Direction::Up, Channel::Model, i, client_size);
        }
        global_client = fserver_aggregate(&locals)?;
        if mode == SplitFedMode::MultiServer {
            // server copies live on the same host, so this costs no traffic
            global_server = fserver_aggregate(&copies)?;
        }
        rows.push(env.measure(t, &global_client, &global_server, &ledger, None)?);
        if budget_spent(config, &ledger) {
            break;
        }
    }

    Ok(RunReport {
        rows,
        ledger,
        final_client: global_client,
        final_server: global_server,
        final_aux: Vec::new(),
    })
}

pub fn run_cse_fsl(config: &RunConfig) -> Result<RunReport> {
    let env = Environment::build(config)?;
    run_cse_fsl_in(&env, config)
}

/// Like FSL-SAGE but the auxiliary model learns locally from labels, is
/// never aligned, and travels with the client model every round.
pub fn run_cse_fsl_in(env: &Environment, config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    let bundle = &env.bundle;
    let sched = &config.schedule;
    let optim = &config.optim;
    let m = sched.clients;
    let client_size = bundle.client_init.len() as u64;
    let aux_size = bundle.aux_init.len() as u64;
    let schedule = LocalSchedule::new(sched.local_steps, sched.uplinks_per_round)?;
    let aux_lr = optim.cse_aux_lr();

    let mut clients = env.client_states(config);
    let mut server = ServerState::new(bundle.server_init.clone(), m, None);
    let mut global_client = bundle.client_init.clone();
    let mut global_aux = bundle.aux_init.clone();
    let mut ledger = CommLedger::new();
    let mut rows = Vec::with_capacity(sched.rounds);

    for t in 0..sched.rounds {
        for c in clients.iter_mut() {
            c.client_params.clone_from(&global_client);
            c.aux_params.clone_from(&global_aux);
            charge(&mut ledger, t, Direction::Down, Channel::Model, c.id, client_size);
            charge(&mut ledger, t, Direction::Down, Channel::Aux, c.id, aux_size);
        }

        let mut outboxes = Vec::with_capacity(m);
        for c in clients.iter_mut() {
            let aux_spec = &bundle.aux_spec;
            let sent = local_round_with(
                c,
                &bundle.client_spec,
                &env.train,
                schedule,
                optim.client_lr,
                t,
                |aux, z, y| {
                    let lg = loss_and_grad(aux_spec, aux, z, Targets::Classes(y))?;
                    sgd_step_in_place(aux, &lg.grad_params, aux_lr)?;
                    Ok(lg.grad_inputs)
                },
            )?;
            for r in &sent {
                charge(&mut ledger, t, Direction::Up, Channel::Smashed, c.id, r.wire_scalars());
            }
            outboxes.push(sent.into_iter());
        }
        // same slot order as FSL-SAGE; nothing is archived
        for _ in 0..sched.uplinks_per_round {
            for outbox in outboxes.iter_mut() {
                if let Some(rec) = outbox.next() {
                    server_update(
                        &bundle.server_spec,
                        &mut server.params,
                        &rec.z_f,
                        &rec.labels,
                        optim.server_lr,
                    )?;
                }
            }
        }

        for c in &clients {
            charge(&mut ledger, t, Direction::Up, Channel::Model, c.id, client_size);
            charge(&mut ledger, t, Direction::Up, Channel::Aux, c.id, aux_size);
        }
        let uploads: Vec<_> = clients.iter().map(|c| c.client_params.clone()).collect();
        let aux_uploads: Vec<_> = clients.iter().map(|c| c.aux_params.clone()).collect();
        global_client = fserver_aggregate(&uploads)?;
        global_aux = fserver_aggregate(&aux_uploads)?;
        for c in clients.iter_mut() {
            c.client_params.clone_from(&global_client);
            c.aux_params.clone_from(&global_aux);
        }

        rows.push(env.measure(t, &global_client, &server.params, &ledger, Some((&clients, &server)))?);
        if budget_spent(config, &ledger) {
            break;
        }
    }

    Ok(RunReport {
        rows,
        ledger,
        final_client: global_client,
        final_server: server.params,
        final_aux: clients.into_iter().map(|c| c.aux_params).collect(),
    })
}
