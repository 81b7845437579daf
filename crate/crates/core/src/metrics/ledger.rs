use alloc::vec::Vec;

/// Bytes charged per transmitted scalar. Compute stays in `f64`; the wire
/// is accounted as 32-bit.
pub const WIRE_BYTES_PER_SCALAR: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    /// Client to server.
    Up,
    /// Server to client.
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    /// Client-side (or, for FedAvg, full) model parameters.
    Model,
    /// Cut-layer activations and their labels.
    Smashed,
    /// Cut-layer gradients returned by the server.
    Gradient,
    /// Auxiliary model parameters.
    Aux,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::Model, Channel::Smashed, Channel::Gradient, Channel::Aux];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Model => "model",
            Channel::Smashed => "smashed",
            Channel::Gradient => "gradient",
            Channel::Aux => "aux",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CommEvent {
    pub round: usize,
    pub direction: Direction,
    pub channel: Channel,
    pub client: usize,
    pub scalars: u64,
}

impl CommEvent {
    pub fn bytes(&self) -> u64 {
        self.scalars * WIRE_BYTES_PER_SCALAR
    }
}

/// Filter over ledger events; `None` fields match anything.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LedgerQuery {
    pub round: Option<usize>,
    pub direction: Option<Direction>,
    pub channel: Option<Channel>,
    pub client: Option<usize>,
}

impl LedgerQuery {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn round(mut self, round: usize) -> Self {
        self.round = Some(round);
        self
    }

    pub fn direction(mut self, direction: Direction) -> Self {
        self.direction = Some(direction);
        self
    }

    pub fn channel(mut self, channel: Channel) -> Self {
        self.channel = Some(channel);
        self
    }

    pub fn client(mut self, client: usize) -> Self {
        self.client = Some(client);
        self
    }

    pub fn matches(&self, e: &CommEvent) -> bool {
        self.round.is_none_or(|r| r == e.round)
            && self.direction.is_none_or(|d| d == e.direction)
            && self.channel.is_none_or(|c| c == e.channel)
            && self.client.is_none_or(|c| c == e.client)
    }
}

/// Append-only record of every transmission.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CommLedger {
    events: Vec<CommEvent>,
    total_scalars: u64,
}

impl CommLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn charge(&mut self, event: CommEvent) {
        self.total_scalars += event.scalars;
        self.events.push(event);
    }

    pub fn events(&self) -> &[CommEvent] {
        &self.events
    }

    pub fn total_bytes(&self) -> u64 {
        self.total_scalars * WIRE_BYTES_PER_SCALAR
    }

    pub fn bytes(&self, query: LedgerQuery) -> u64 {
        self.events
            .iter()
            .filter(|e| query.matches(e))
            .map(CommEvent::bytes)
            .sum()
    }

    /// Number of matching transmissions.
    pub fn count(&self, query: LedgerQuery) -> usize {
        self.events.iter().filter(|e| query.matches(e)).count()
    }

    /// Bytes charged in rounds `0..=round`.
    pub fn cumulative_bytes(&self, round: usize) -> u64 {
        self.events
            .iter()
            .filter(|e| e.round <= round)
            .map(CommEvent::bytes)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(round: usize, direction: Direction, channel: Channel, client: usize, scalars: u64) -> CommEvent {
        CommEvent {
            round,
            direction,
            channel,
            client,
            scalars,
        }
    }

    #[test]
    fn empty_ledger_is_zero_everywhere() {
        let l = CommLedger::new();
        assert_eq!(l.total_bytes(), 0);
        assert_eq!(l.bytes(LedgerQuery::all().channel(Channel::Aux).round(3)), 0);
        assert_eq!(l.cumulative_bytes(10), 0);
    }

    #[test]
    fn model_upload_of_thousand_scalars() {
        let mut l = CommLedger::new();
        l.charge(ev(0, Direction::Up, Channel::Model, 0, 1000));
        assert_eq!(
            l.bytes(LedgerQuery::all().direction(Direction::Up).channel(Channel::Model)),
            4000
        );
        assert_eq!(l.bytes(LedgerQuery::all().direction(Direction::Down)), 0);
    }

    #[test]
    fn aggregations_are_conserved() {
        let mut l = CommLedger::new();
        let mut k = 1;
        for round in 0..3 {
            for client in 0..2 {
                for ch in Channel::ALL {
                    l.charge(ev(round, Direction::Up, ch, client, k));
                    l.charge(ev(round, Direction::Down, ch, client, 2 * k));
                    k += 3;
                }
            }
        }
        let total = l.total_bytes();
        let by_channel: u64 = Channel::ALL
            .iter()
            .map(|&c| l.bytes(LedgerQuery::all().channel(c)))
            .sum();
        let by_client: u64 = (0..2).map(|c| l.bytes(LedgerQuery::all().client(c))).sum();
        let by_round: u64 = (0..3).map(|r| l.bytes(LedgerQuery::all().round(r))).sum();
        assert_eq!(total, by_channel);
        assert_eq!(total, by_client);
        assert_eq!(total, by_round);
        assert!(l.cumulative_bytes(0) <= l.cumulative_bytes(1));
        assert_eq!(l.cumulative_bytes(2), total);
    }

    proptest::proptest! {
        #[test]
        fn slicing_conserves_bytes(
            events in proptest::collection::vec((0usize..6, proptest::bool::ANY, 0usize..4, 0usize..5, 0u64..10_000), 0..60),
        ) {
            let mut l = CommLedger::new();
            for &(round, up, ch, client, scalars) in &events {
                let direction = if up { Direction::Up } else { Direction::Down };
                l.charge(ev(round, direction, Channel::ALL[ch], client, scalars));
            }
            let total = l.total_bytes();
            let by_channel: u64 = Channel::ALL.iter().map(|&c| l.bytes(LedgerQuery::all().channel(c))).sum();
            let by_client: u64 = (0..5).map(|c| l.bytes(LedgerQuery::all().client(c))).sum();
            let by_round: u64 = (0..6).map(|r| l.bytes(LedgerQuery::all().round(r))).sum();
            let by_direction: u64 = [Direction::Up, Direction::Down].iter().map(|&d| l.bytes(LedgerQuery::all().direction(d))).sum();
            proptest::prop_assert_eq!(total, events.iter().map(|e| e.4 * WIRE_BYTES_PER_SCALAR).sum::<u64>());
            proptest::prop_assert_eq!(by_channel, total);
            proptest::prop_assert_eq!(by_client, total);
            proptest::prop_assert_eq!(by_round, total);
            proptest::prop_assert_eq!(by_direction, total);
            proptest::prop_assert_eq!(l.cumulative_bytes(5), total);
        }
    }
}
