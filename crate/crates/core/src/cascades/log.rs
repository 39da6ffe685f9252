use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::node::NodeId;

/// One forwarding event `(parent, child, t)`. Roots have no parent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CascadeEvent {
    pub parent: Option<NodeId>,
    pub child: NodeId,
    #[serde(rename = "t")]
    pub time: u64,
}

impl CascadeEvent {
    pub fn root(child: impl Into<NodeId>, time: u64) -> Self {
        CascadeEvent { parent: None, child: child.into(), time }
    }

    pub fn forward(parent: impl Into<NodeId>, child: impl Into<NodeId>, time: u64) -> Self {
        CascadeEvent { parent: Some(parent.into()), child: child.into(), time }
    }

    pub fn is_root(&self) -> bool {
        self.parent.is_none()
    }
}

/// All messages of a log, each an event list sorted by time (stable).
///
/// Raw logs may contain a child more than once per message (repeated
/// forwarding in real data); consumers that need the one-forward-per-message
/// view call [`CascadeLog::first_forwards`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CascadeLog {
    messages: BTreeMap<String, Vec<CascadeEvent>>,
}

#[derive(Serialize, Deserialize)]
struct MessageLine {
    mid: String,
    events: Vec<CascadeEvent>,
}

impl CascadeLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds events to message `mid`, merging with any already present and
    /// re-sorting by time. Equal timestamps keep insertion order.
    pub fn insert(&mut self, mid: impl Into<String>, events: impl IntoIterator<Item = CascadeEvent>) {
        let list = self.messages.entry(mid.into()).or_default();
        list.extend(events);
        list.sort_by_key(|e| e.time);
    }

    pub fn messages(&self) -> impl ExactSizeIterator<Item = (&str, &[CascadeEvent])> + '_ {
        self.messages.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn message(&self, mid: &str) -> Option<&[CascadeEvent]> {
        self.messages.get(mid).map(Vec::as_slice)
    }

    pub fn message_count(&self) -> usize {
        self.messages.len()
    }

    pub fn event_count(&self) -> usize {
        self.messages.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    /// Number of forwarding (non-root) events.
    pub fn forward_count(&self) -> usize {
        self.messages.values().flatten().filter(|e| !e.is_root()).count()
    }

    pub fn into_messages(self) -> BTreeMap<String, Vec<CascadeEvent>> {
        self.messages
    }

    /// Parses the JSONL cascade format, one message per line.
    pub fn parse<R: BufRead>(reader: R) -> Result<Self> {
        parse_cascades(reader)
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for (mid, events) in &self.messages {
            let line = MessageLine { mid: mid.clone(), events: events.clone() };
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Keeps only the first forward of each child per message.
    /// Returns the reduced events and how many duplicates were dropped.
    pub fn first_forwards(events: &[CascadeEvent]) -> (Vec<&CascadeEvent>, usize) {
        let mut seen = std::collections::HashSet::with_capacity(events.len());
        let mut kept = Vec::with_capacity(events.len());
        let mut dropped = 0;
        for e in events {
            if seen.insert(&e.child) {
                kept.push(e);
            } else {
                dropped += 1;
            }
        }
        (kept, dropped)
    }
}

pub fn parse_cascades<R: BufRead>(reader: R) -> Result<CascadeLog> {
    let mut log = CascadeLog::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let msg: MessageLine = serde_json::from_str(&line)
            .map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
        if let Some(bad) = msg.events.iter().find(|e| e.parent.as_ref() == Some(&e.child)) {
            return Err(Error::RejectedRecord {
                line: line_no,
                reason: format!("node `{}` forwards from itself", bad.child),
            });
        }
        log.insert(msg.mid, msg.events);
    }
    Ok(log)
}

/// Drops abnormal forwarding pairs.
///
/// Pairs seen more than `max_pair_per_message` times inside a single message
/// are removed from that message first; afterwards every pair whose
/// remaining total across the log is below `min_pair_total` is removed.
/// Root events are never touched.
pub fn prune(log: &CascadeLog, min_pair_total: usize, max_pair_per_message: usize) -> CascadeLog {
    type Pair<'a> = (&'a NodeId, &'a NodeId);

    let mut stage: BTreeMap<&str, Vec<&CascadeEvent>> = BTreeMap::new();
    for (mid, events) in log.messages() {
        let mut local: HashMap<Pair, usize> = HashMap::new();
        for e in events {
            if let Some(p) = &e.parent {
                *local.entry((p, &e.child)).or_default() += 1;
            }
        }
        let kept = events
            .iter()
            .filter(|e| match &e.parent {
                Some(p) => local[&(p, &e.child)] <= max_pair_per_message,
                None => true,
            })
            .collect();
        stage.insert(mid, kept);
    }

    let mut totals: HashMap<Pair, usize> = HashMap::new();
    for e in stage.values().flatten() {
        if let Some(p) = &e.parent {
            *totals.entry((p, &e.child)).or_default() += 1;
        }
    }

    let mut out = CascadeLog::new();
    for (mid, events) in stage {
        let kept = events
            .into_iter()
            .filter(|e| match &e.parent {
                Some(p) => totals[&(p, &e.child)] >= min_pair_total,
                None => true,
            })
            .cloned();
        out.insert(mid, kept);
    }
    out
}

/// Result of [`split_by_time`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeSplit {
    /// `windows[i]` holds messages whose earliest event lies in
    /// `[boundaries[i], boundaries[i + 1])`.
    pub windows: Vec<CascadeLog>,
    /// Messages outside every window, or with no events at all.
    pub overflow: CascadeLog,
}

pub fn split_by_time(log: &CascadeLog, boundaries: &[u64]) -> Result<TimeSplit> {
    if boundaries.len() < 2 {
        return Err(Error::InvalidConfig("need at least two window boundaries".into()));
    }
    if boundaries.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig("window boundaries must be strictly increasing".into()));
    }
    let mut windows = vec![CascadeLog::new(); boundaries.len() - 1];
    let mut overflow = CascadeLog::new();
    for (mid, events) in log.messages() {
        let target = events.iter().map(|e| e.time).min().and_then(|start| {
            // index of the last boundary <= start
            let pos = boundaries.partition_point(|&b| b <= start);
            (pos >= 1 && pos < boundaries.len()).then(|| pos - 1)
        });
        match target {
            Some(w) => windows[w].insert(mid, events.iter().cloned()),
            None => overflow.insert(mid, events.iter().cloned()),
        }
    }
    Ok(TimeSplit { windows, overflow })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(parent: Option<&str>, child: &str, t: u64) -> CascadeEvent {
        CascadeEvent { parent: parent.map(NodeId::from), child: child.into(), time: t }
    }

    #[test]
    fn parses_single_message() {
        let src = r#"{"mid":"m1","events":[{"parent":null,"child":"a","t":0},{"parent":"a","child":"b","t":5}]}"#;
        let log = parse_cascades(src.as_bytes()).unwrap();
        assert_eq!(log.message_count(), 1);
        assert_eq!(log.message("m1").unwrap(), &[ev(None, "a", 0), ev(Some("a"), "b", 5)]);
    }

    #[test]
    fn empty_stream_is_empty_log() {
        let log = parse_cascades("".as_bytes()).unwrap();
        assert!(log.is_empty());
    }

    #[test]
    fn sorts_events_and_ignores_unknown_fields() {
        let src = concat!(
            r#"{"mid":"m","lang":"zh","events":[{"parent":"a","child":"c","t":9,"x":1},"#,
            r#"{"parent":null,"child":"a","t":0},{"parent":"a","child":"b","t":3}]}"#
        );
        let log = parse_cascades(src.as_bytes()).unwrap();
        let times: Vec<u64> = log.message("m").unwrap().iter().map(|e| e.time).collect();
        assert_eq!(times, vec![0, 3, 9]);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let src = "{\"mid\":\"a\",\"events\":[]}\n\nnot json\n";
        match parse_cascades(src.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_time_is_a_parse_error() {
        let src = r#"{"mid":"m","events":[{"parent":null,"child":"a","t":-1}]}"#;
        assert!(matches!(parse_cascades(src.as_bytes()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn self_forward_is_rejected() {
        let src = r#"{"mid":"m","events":[{"parent":"a","child":"a","t":1}]}"#;
        assert!(matches!(parse_cascades(src.as_bytes()), Err(Error::RejectedRecord { line: 1, .. })));
    }

    #[test]
    fn jsonl_round_trip() {
        let mut log = CascadeLog::new();
        log.insert("m1", [ev(None, "a", 0), ev(Some("a"), "b", 2)]);
        log.insert("m2", [ev(None, "c", 4)]);
        let mut buf = Vec::new();
        log.write_jsonl(&mut buf).unwrap();
        assert_eq!(parse_cascades(buf.as_slice()).unwrap(), log);
    }

    #[test]
    fn prune_total_threshold() {
        let mut log = CascadeLog::new();
        for i in 0..49 {
            log.insert(format!("m{i}"), [ev(None, "a", 0), ev(Some("a"), "b", 1)]);
        }
        let pruned = prune(&log, 50, 50);
        assert_eq!(pruned.message_count(), 49);
        assert_eq!(pruned.forward_count(), 0);
        assert_eq!(pruned.event_count(), 49);
    }

    #[test]
    fn prune_per_message_threshold() {
        let mut log = CascadeLog::new();
        log.insert("burst", (0..51).map(|t| ev(Some("a"), "b", t)));
        log.insert("burst", [ev(None, "a", 0)]);
        for i in 0..60 {
            log.insert(format!("m{i}"), [ev(None, "a", 0), ev(Some("a"), "b", 1)]);
        }
        let pruned = prune(&log, 50, 50);
        assert_eq!(pruned.message("burst").unwrap(), &[ev(None, "a", 0)]);
        assert_eq!(pruned.forward_count(), 60);
    }

    #[test]
    fn prune_identity_thresholds() {
        let mut log = CascadeLog::new();
        log.insert("m", [ev(None, "a", 0), ev(Some("a"), "b", 1), ev(Some("a"), "b", 2)]);
        assert_eq!(prune(&log, 0, usize::MAX), log);
    }

    #[test]
    fn split_half_open_windows() {
        let mut log = CascadeLog::new();
        log.insert("early", [ev(None, "a", 5)]);
        log.insert("edge", [ev(None, "a", 10), ev(Some("a"), "b", 25)]);
        log.insert("late", [ev(None, "a", 20)]);
        log.insert("before", [ev(None, "a", 1)]);
        let split = split_by_time(&log, &[2, 10, 20]).unwrap();
        assert!(split.windows[0].message("early").is_some());
        assert!(split.windows[1].message("edge").is_some());
        assert!(split.overflow.message("late").is_some());
        assert!(split.overflow.message("before").is_some());
        assert_eq!(split.windows[0].message_count() + split.windows[1].message_count(), 2);
    }

    #[test]
    fn split_empty_log() {
        let split = split_by_time(&CascadeLog::new(), &[0, 10, 20]).unwrap();
        assert_eq!(split.windows.len(), 2);
        assert!(split.windows.iter().all(CascadeLog::is_empty));
    }

    #[test]
    fn split_rejects_unsorted_boundaries() {
        assert!(split_by_time(&CascadeLog::new(), &[0, 10, 10]).is_err());
    }

    #[test]
    fn first_forwards_drops_repeats() {
        let events = [ev(None, "a", 0), ev(Some("a"), "b", 1), ev(Some("a"), "b", 2)];
        let (kept, dropped) = CascadeLog::first_forwards(&events);
        assert_eq!(kept.len(), 2);
        assert_eq!(dropped, 1);
    }
}
