//! The mesh engine: routers, buffers, arbitration, and the per-cycle step.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap, VecDeque};

use super::{Coord, FlowControl, NocParams};
use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlitKind {
    Head,
    Body,
    Tail,
    HeadTail,
}

impl FlitKind {
    fn of(seq: u32, length: u32) -> FlitKind {
        match (seq == 0, seq + 1 == length) {
            (true, true) => FlitKind::HeadTail,
            (true, false) => FlitKind::Head,
            (false, true) => FlitKind::Tail,
            (false, false) => FlitKind::Body,
        }
    }

    fn is_head(self) -> bool {
        matches!(self, FlitKind::Head | FlitKind::HeadTail)
    }

    fn is_tail(self) -> bool {
        matches!(self, FlitKind::Tail | FlitKind::HeadTail)
    }
}

#[derive(Debug, Clone, Copy)]
struct Flit {
    packet: u64,
    seq: u32,
    kind: FlitKind,
    dst: Coord,
    /// Cycle the flit became available at its current position; it may
    /// arbitrate strictly after this cycle.
    ready: u64,
}

/// Directions: 0 = north (+y), 1 = east (+x), 2 = south (-y), 3 = west (-x).
const DIRS: usize = 4;
const PORT_LOCAL: usize = DIRS;

fn opposite(dir: usize) -> usize {
    (dir + 2) % DIRS
}

#[derive(Debug, Default)]
struct Router {
    fifos: [VecDeque<Flit>; DIRS],
    /// Slots promised to flits currently crossing the incoming link.
    reserved: [usize; DIRS],
    /// Wormhole output ownership, head to tail.
    out_owner: [Option<u64>; DIRS],
    /// Single-VC wormhole: the input channel belongs to one packet from its
    /// head entering until its tail pops; the next head waits upstream.
    vc_owner: [Option<u64>; DIRS],
    eject_owner: Option<u64>,
    /// Each buffered delivery costs the switch one drain cycle afterwards.
    clear_backlog: u32,
    switch_busy_until: u64,
}

impl Router {
    fn has_buffered(&self) -> bool {
        self.fifos.iter().any(|f| !f.is_empty())
    }
}

#[derive(Debug, Clone)]
struct InjPacket {
    id: u64,
    dst: Coord,
    length: u32,
    next_seq: u32,
    ready: u64,
}

#[derive(Debug, Clone)]
pub struct PacketRecord {
    pub id: u64,
    pub src: Coord,
    pub dst: Coord,
    pub length: u32,
    pub inject_cycle: u64,
    pub delivered_cycle: Option<u64>,
    pub flits_delivered: u32,
}

impl PacketRecord {
    pub fn latency(&self) -> Option<u64> {
        self.delivered_cycle.map(|d| d - self.inject_cycle)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NocStats {
    pub injected_packets: u64,
    pub injected_flits: u64,
    pub delivered_packets: u64,
    pub delivered_flits: u64,
    pub throttled_injections: u64,
    pub flit_hops: u64,
}

#[derive(Debug, Clone, Copy)]
enum Landing {
    Buffer { router: usize, in_dir: usize },
    Deliver { router: usize },
    Stay,
}

#[derive(Debug, Clone, Copy)]
struct Move {
    flit: Flit,
    from: usize,
    from_port: usize,
    landing: Landing,
    hops: u32,
    due: u64,
    release_out: Option<(usize, usize)>,
}

struct Ssr {
    origin: usize,
    port: usize,
    flit: Flit,
    /// (router landed on, direction of the hop) per candidate hop, following
    /// the XY route; the bypass may carry the flit through its turn.
    path: Vec<(usize, usize)>,
    eject: bool,
}

pub struct NocEngine {
    params: NocParams,
    routers: Vec<Router>,
    inj: Vec<VecDeque<InjPacket>>,
    pending: Vec<Move>,
    records: Vec<PacketRecord>,
    cycle: u64,
    last_progress: u64,
    active: BTreeSet<usize>,
    /// SMART only: last landing router of each undelivered flit, keyed by
    /// (packet, seq). Flit s never runs past flit s-1's position, so flits
    /// of one packet stay in order.
    flit_pos: HashMap<(u64, u32), usize>,
    stats: NocStats,
    /// Ideal-flow (and loopback) deliveries: (due cycle, packet id).
    ideal_due: BinaryHeap<Reverse<(u64, u64)>>,
    trace: Option<Box<dyn FnMut(u64, u64, u32, Coord, &'static str)>>,
}

impl NocEngine {
    pub fn new(params: NocParams) -> Self {
        let n = params.nodes();
        NocEngine {
            params,
            routers: (0..n).map(|_| Router::default()).collect(),
            inj: vec![VecDeque::new(); n],
            pending: Vec::new(),
            records: Vec::new(),
            cycle: 0,
            last_progress: 0,
            active: BTreeSet::new(),
            flit_pos: HashMap::new(),
            stats: NocStats::default(),
            ideal_due: BinaryHeap::new(),
            trace: None,
        }
    }

    pub fn params(&self) -> &NocParams {
        &self.params
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn stats(&self) -> NocStats {
        self.stats
    }

    pub fn records(&self) -> &[PacketRecord] {
        &self.records
    }

    pub fn set_trace(&mut self, f: Box<dyn FnMut(u64, u64, u32, Coord, &'static str)>) {
        self.trace = Some(f);
    }

    fn emit_trace(&mut self, packet: u64, seq: u32, at: Coord, action: &'static str) {
        if let Some(t) = self.trace.as_mut() {
            t(self.cycle, packet, seq, at, action);
        }
    }

    fn idx(&self, c: Coord) -> usize {
        c.y * self.params.cols + c.x
    }

    fn coord(&self, idx: usize) -> Coord {
        Coord::new(idx % self.params.cols, idx / self.params.cols)
    }

    fn neighbor(&self, idx: usize, dir: usize) -> usize {
        let c = self.coord(idx);
        let n = match dir {
            0 => Coord::new(c.x, c.y + 1),
            1 => Coord::new(c.x + 1, c.y),
            2 => Coord::new(c.x, c.y - 1),
            _ => Coord::new(c.x - 1, c.y),
        };
        self.idx(n)
    }

    /// XY: exhaust the x displacement, then y. None means "at destination".
    fn next_dir(&self, at: Coord, dst: Coord) -> Option<usize> {
        if dst.x > at.x {
            Some(1)
        } else if dst.x < at.x {
            Some(3)
        } else if dst.y > at.y {
            Some(0)
        } else if dst.y < at.y {
            Some(2)
        } else {
            None
        }
    }

    /// Queue a packet for injection. Returns Ok(None) and counts a source
    /// throttle when the injection queue is full.
    pub fn try_inject(&mut self, src: Coord, dst: Coord, length: u32) -> Result<Option<u64>> {
        if length == 0 {
            return Err(SimError::Precondition("packet length must be >= 1".into()));
        }
        for c in [src, dst] {
            if !self.params.contains(c) {
                return Err(SimError::OffMesh {
                    x: c.x,
                    y: c.y,
                    cols: self.params.cols,
                    rows: self.params.rows,
                });
            }
        }
        if src == dst && !self.params.allow_loopback {
            return Err(SimError::Precondition(
                "loopback injection disabled (src == dst)".into(),
            ));
        }
        let id = self.records.len() as u64;
        if matches!(self.params.flow, FlowControl::Ideal) || src == dst {
            // Contention-free: one wire cycle plus serialization.
            let due = self.cycle + self.params.link_delay + (length as u64 - 1);
            self.records.push(PacketRecord {
                id,
                src,
                dst,
                length,
                inject_cycle: self.cycle,
                delivered_cycle: None,
                flits_delivered: 0,
            });
            self.stats.injected_packets += 1;
            self.stats.injected_flits += length as u64;
            self.ideal_due.push(Reverse((due, id)));
            return Ok(Some(id));
        }
        let sidx = self.idx(src);
        if self.inj[sidx].len() >= self.params.injection_queue_packets {
            self.stats.throttled_injections += 1;
            return Ok(None);
        }
        self.records.push(PacketRecord {
            id,
            src,
            dst,
            length,
            inject_cycle: self.cycle,
            delivered_cycle: None,
            flits_delivered: 0,
        });
        self.stats.injected_packets += 1;
        self.stats.injected_flits += length as u64;
        self.inj[sidx].push_back(InjPacket {
            id,
            dst,
            length,
            next_seq: 0,
            ready: self.cycle,
        });
        self.active.insert(sidx);
        self.emit_trace(id, 0, src, "inject");
        Ok(Some(id))
    }

    /// Advance the network by one cycle.
    pub fn step(&mut self) -> Result<()> {
        self.cycle += 1;
        let t = self.cycle;
        self.drain_ideal(t);
        match self.params.flow {
            FlowControl::Ideal => {}
            FlowControl::Wormhole => {
                self.execute_moves(t);
                self.arbitrate_buffered(t);
            }
            FlowControl::Smart => {
                self.execute_moves(t);
                if self.params.hpcmax <= 1 {
                    // Bypass disabled degenerates to the wormhole baseline.
                    self.arbitrate_buffered(t);
                } else {
                    self.arbitrate_smart(t);
                }
            }
        }
        if self.in_flight_flits() > 0
            && t.saturating_sub(self.last_progress) > self.params.progress_window
        {
            return Err(SimError::Deadlock {
                cycle: t,
                window: self.params.progress_window,
            });
        }
        Ok(())
    }

    fn drain_ideal(&mut self, t: u64) {
        while let Some(&Reverse((due, id))) = self.ideal_due.peek() {
            if due > t {
                break;
            }
            self.ideal_due.pop();
            let rec = &mut self.records[id as usize];
            rec.flits_delivered = rec.length;
            rec.delivered_cycle = Some(due);
            let len = rec.length as u64;
            self.stats.delivered_packets += 1;
            self.stats.delivered_flits += len;
            self.stats.flit_hops += len;
            self.last_progress = t;
        }
    }

    fn execute_moves(&mut self, t: u64) {
        let mut due: Vec<Move> = Vec::new();
        let mut keep: Vec<Move> = Vec::new();
        for mv in self.pending.drain(..) {
            if mv.due <= t {
                due.push(mv);
            } else {
                keep.push(mv);
            }
        }
        self.pending = keep;
        let smart = matches!(self.params.flow, FlowControl::Smart) && self.params.hpcmax > 1;
        for mv in due {
            let pkt = mv.flit.packet;
            match mv.landing {
                Landing::Deliver { router } => {
                    self.stats.flit_hops += mv.hops as u64;
                    let at = self.coord(router);
                    debug_assert_eq!(self.routers[router].eject_owner, Some(pkt));
                    let rec = &mut self.records[pkt as usize];
                    assert_eq!(
                        rec.flits_delivered, mv.flit.seq,
                        "out-of-order delivery for packet {pkt}"
                    );
                    rec.flits_delivered += 1;
                    self.stats.delivered_flits += 1;
                    if mv.flit.kind.is_tail() {
                        rec.delivered_cycle = Some(t);
                        self.stats.delivered_packets += 1;
                        self.routers[router].eject_owner = None;
                        if !smart {
                            // Buffered (wormhole) ejection drains through the
                            // switch; bypass deliveries do not.
                            self.routers[router].clear_backlog += mv.flit.seq + 1;
                            self.active.insert(router);
                        }
                    }
                    if smart {
                        self.flit_pos.remove(&(pkt, mv.flit.seq));
                    }
                    self.pop_origin(&mv, true);
                    self.last_progress = t;
                    self.emit_trace(pkt, mv.flit.seq, at, "deliver");
                }
                Landing::Buffer { router, in_dir } => {
                    self.stats.flit_hops += mv.hops as u64;
                    let mut flit = mv.flit;
                    flit.ready = t;
                    self.routers[router].reserved[in_dir] -= 1;
                    self.routers[router].fifos[in_dir].push_back(flit);
                    self.active.insert(router);
                    if smart {
                        self.flit_pos.insert((pkt, mv.flit.seq), router);
                    }
                    self.pop_origin(&mv, true);
                    self.last_progress = t;
                    let at = self.coord(router);
                    self.emit_trace(pkt, mv.flit.seq, at, "hop");
                }
                Landing::Stay => {
                    self.pop_origin(&mv, false);
                }
            }
            if let Some((r, d)) = mv.release_out {
                self.routers[r].out_owner[d] = None;
            }
        }
    }

    /// Finalize or revert the origin-side state of a move. Flits are taken
    /// out of their FIFO (or the injection sequence advanced) at grant time;
    /// a Stay landing puts them back where they were.
    fn pop_origin(&mut self, mv: &Move, moved: bool) {
        if mv.from_port == PORT_LOCAL {
            let q = &mut self.inj[mv.from];
            let head = q.front_mut().expect("inject queue head vanished");
            debug_assert_eq!(head.id, mv.flit.packet);
            if moved {
                if mv.flit.kind.is_tail() {
                    q.pop_front();
                }
            } else {
                head.next_seq -= 1;
            }
        } else if !moved {
            // Re-queue at the back so a repeatedly blocked flit cannot
            // monopolize the scan order.
            self.routers[mv.from].fifos[mv.from_port].push_back(mv.flit);
            self.active.insert(mv.from);
        }
    }

    fn peek_candidate(&self, ridx: usize, port: usize) -> Option<Flit> {
        if port == PORT_LOCAL {
            let pk = self.inj[ridx].front()?;
            if pk.next_seq >= pk.length {
                return None; // fully issued, tail still in flight
            }
            Some(Flit {
                packet: pk.id,
                seq: pk.next_seq,
                kind: FlitKind::of(pk.next_seq, pk.length),
                dst: pk.dst,
                ready: pk.ready,
            })
        } else {
            self.routers[ridx].fifos[port].front().copied()
        }
    }

    /// Take the candidate out of its queue once granted.
    fn take_candidate(&mut self, ridx: usize, port: usize, index: usize, t: u64) -> Flit {
        if port == PORT_LOCAL {
            let pk = self.inj[ridx].front_mut().expect("candidate vanished");
            let flit = Flit {
                packet: pk.id,
                seq: pk.next_seq,
                kind: FlitKind::of(pk.next_seq, pk.length),
                dst: pk.dst,
                ready: pk.ready,
            };
            pk.next_seq += 1;
            pk.ready = t;
            flit
        } else {
            self.routers[ridx].fifos[port]
                .remove(index)
                .expect("candidate vanished")
        }
    }

    /// SMART segment for a flit sitting at `ridx`: the next hops of its XY
    /// route (up to hpc, turning mid-flight where the route turns), cut at
    /// the packet's previous flit, with the ejection intent cleared when
    /// another packet owns the sink. None when the flit cannot usefully
    /// move this cycle.
    fn smart_segment(
        &self,
        ridx: usize,
        flit: &Flit,
        hpc: usize,
    ) -> Option<(Vec<(usize, usize)>, bool)> {
        // A flit may never pass the preceding flit of its packet; if that
        // flit is parked right here, wait behind it.
        if flit.seq > 0 {
            if let Some(&b) = self.flit_pos.get(&(flit.packet, flit.seq - 1)) {
                if b == ridx {
                    return None;
                }
            }
        }
        let mut path: Vec<(usize, usize)> = Vec::new();
        let mut cur = ridx;
        let mut eject = false;
        for _ in 0..hpc {
            let at = self.coord(cur);
            let Some(dir) = self.next_dir(at, flit.dst) else {
                eject = true;
                break;
            };
            cur = self.neighbor(cur, dir);
            path.push((cur, dir));
        }
        if self.coord(cur) == flit.dst {
            eject = true;
        }
        // Never run past the packet's previous flit.
        if flit.seq > 0 {
            if let Some(b) = self.flit_pos.get(&(flit.packet, flit.seq - 1)) {
                if let Some(pos) = path.iter().position(|(r, _)| r == b) {
                    path.truncate(pos + 1);
                    eject = false;
                }
            }
        }
        if eject {
            let sink = path.last().map(|(r, _)| *r).unwrap_or(ridx);
            let owner = self.routers[sink].eject_owner;
            let admissible = match owner {
                None => flit.kind.is_head(),
                Some(o) => o == flit.packet,
            };
            if !admissible {
                // Wait upstream of the contested sink; never park inside the
                // destination router while another packet drains through it.
                eject = false;
                path.pop();
            }
        }
        if path.is_empty() && !eject {
            return None;
        }
        Some((path, eject))
    }

    fn router_has_work(&self, ridx: usize) -> bool {
        self.routers[ridx].has_buffered()
            || !self.inj[ridx].is_empty()
            || self.routers[ridx].clear_backlog > 0
    }

    fn active_snapshot(&mut self) -> Vec<usize> {
        let list: Vec<usize> = self.active.iter().copied().collect();
        for ridx in &list {
            if !self.router_has_work(*ridx) {
                self.active.remove(ridx);
            }
        }
        list
    }

    /// Wormhole arbitration: per router, one switch action per cycle. The
    /// winning flit crosses one link and arrives next cycle; arrival at the
    /// destination is the delivery.
    fn arbitrate_buffered(&mut self, t: u64) {
        let snapshot = self.active_snapshot();
        let mut moves: Vec<Move> = Vec::new();
        for ridx in snapshot {
            let at = self.coord(ridx);
            if self.routers[ridx].clear_backlog > 0 {
                self.routers[ridx].clear_backlog -= 1;
                continue;
            }
            if self.routers[ridx].switch_busy_until >= t {
                continue;
            }
            let start = (t as usize + ridx) % (DIRS + 1);
            for k in 0..=DIRS {
                let port = (start + k) % (DIRS + 1);
                let Some(flit) = self.peek_candidate(ridx, port) else {
                    continue;
                };
                if flit.ready >= t {
                    continue;
                }
                let pkt = flit.packet;
                let Some(dir) = self.next_dir(at, flit.dst) else {
                    // Already at destination (only reachable when a SMART
                    // run left a flit buffered at its target): pure eject.
                    let owner = self.routers[ridx].eject_owner;
                    let ok = match owner {
                        None => flit.kind.is_head(),
                        Some(o) => o == pkt,
                    };
                    if !ok {
                        continue;
                    }
                    let flit = self.take_candidate(ridx, port, 0, t);
                    if flit.kind.is_head() {
                        self.routers[ridx].eject_owner = Some(pkt);
                    }
                    self.routers[ridx].switch_busy_until = t + self.params.router_delay - 1;
                    moves.push(Move {
                        flit,
                        from: ridx,
                        from_port: port,
                        from_index: 0,
                        landing: Landing::Deliver { router: ridx },
                        hops: 0,
                        due: t + self.params.router_delay + self.params.link_delay - 1,
                        release_out: None,
                    });
                    break;
                };
                let nb = self.neighbor(ridx, dir);
                // Output ownership: heads claim a free port, bodies follow.
                let owner = self.routers[ridx].out_owner[dir];
                let owns = match owner {
                    None => flit.kind.is_head(),
                    Some(o) => o == pkt,
                };
                if !owns {
                    continue;
                }
                let delivering = self.coord(nb) == flit.dst;
                if delivering {
                    let eject = self.routers[nb].eject_owner;
                    let ok = match eject {
                        None => flit.kind.is_head(),
                        Some(o) => o == pkt,
                    };
                    if !ok {
                        continue;
                    }
                } else {
                    let in_dir = opposite(dir);
                    let q = &self.routers[nb];
                    if q.fifos[in_dir].len() + q.reserved[in_dir] >= self.params.buffer_depth {
                        continue;
                    }
                }
                let flit = self.take_candidate(ridx, port, 0, t);
                if flit.kind.is_head() {
                    self.routers[ridx].out_owner[dir] = Some(pkt);
                }
                let release_out = flit.kind.is_tail().then_some((ridx, dir));
                let landing = if delivering {
                    if flit.kind.is_head() {
                        self.routers[nb].eject_owner = Some(pkt);
                    }
                    Landing::Deliver { router: nb }
                } else {
                    let in_dir = opposite(dir);
                    self.routers[nb].reserved[in_dir] += 1;
                    Landing::Buffer { router: nb, in_dir }
                };
                self.routers[ridx].switch_busy_until = t + self.params.router_delay - 1;
                moves.push(Move {
                    flit,
                    from: ridx,
                    from_port: port,
                    from_index: 0,
                    landing,
                    hops: 1,
                    due: t + self.params.router_delay + self.params.link_delay - 1,
                    release_out: None,
                });
                // Tail release happens when the flit is actually gone.
                if let Some(r) = release_out {
                    moves.last_mut().unwrap().release_out = Some(r);
                }
                break;
            }
        }
        self.pending.extend(moves);
    }

    /// SMART arbitration. Each router's local switch winner broadcasts an
    /// SSR along its straight XY segment (up to HPCmax hops); every router
    /// then grants each output to the closest requester; granted flits cross
    /// their whole surviving segment in the next cycle.
    fn arbitrate_smart(&mut self, t: u64) {
        let hpc = self.params.hpcmax;
        let snapshot = self.active_snapshot();
        let mut ssrs: Vec<Ssr> = Vec::new();
        for ridx in snapshot {
            if self.routers[ridx].clear_backlog > 0 {
                self.routers[ridx].clear_backlog -= 1;
                continue;
            }
            if self.routers[ridx].switch_busy_until >= t {
                continue;
            }
            let start = (t as usize + ridx) % (DIRS + 1);
            let mut chosen: Option<(usize, usize, Vec<usize>, usize, bool)> = None;
            'ports: for k in 0..=DIRS {
                let port = (start + k) % (DIRS + 1);
                if port == PORT_LOCAL {
                    let Some(flit) = self.peek_candidate(ridx, port) else {
                        continue;
                    };
                    if flit.ready >= t {
                        continue;
                    }
                    if let Some((path, dir, eject)) = self.smart_segment(ridx, &flit, hpc) {
                        chosen = Some((port, 0, path, dir, eject));
                        break 'ports;
                    }
                } else {
                    // SMART switch allocation looks past a blocked head: the
                    // first movable flit wins, so a head waiting on another
                    // packet's ejection cannot wedge the queue.
                    for idx in 0..self.routers[ridx].fifos[port].len() {
                        let flit = self.routers[ridx].fifos[port][idx];
                        if flit.ready >= t {
                            continue;
                        }
                        if let Some((path, dir, eject)) = self.smart_segment(ridx, &flit, hpc) {
                            chosen = Some((port, idx, path, dir, eject));
                            break 'ports;
                        }
                    }
                }
            }
            let Some((port, idx, path, dir, eject)) = chosen else {
                continue;
            };
            self.routers[ridx].switch_busy_until = t + self.params.router_delay - 1;
            let flit = self.take_candidate(ridx, port, idx, t);
            ssrs.push(Ssr {
                origin: ridx,
                port,
                from_index: idx,
                flit,
                path,
                dir,
                eject,
            });
        }

        // Grant phase: minimum hop distance wins each (router, output).
        let mut grants: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        let mut eject_grants: HashMap<usize, (usize, usize)> = HashMap::new();
        for (sid, ssr) in ssrs.iter_mut().enumerate() {
            let mut prev = ssr.origin;
            for (i, &hop) in ssr.path.iter().enumerate() {
                let key = (prev, ssr.dir);
                match grants.get(&key) {
                    Some(&(d, _)) if d <= i => {}
                    _ => {
                        grants.insert(key, (i, sid));
                    }
                }
                prev = hop;
            }
            if ssr.eject {
                let dst = *ssr.path.last().unwrap_or(&ssr.origin);
                let owner = self.routers[dst].eject_owner;
                let admissible = match owner {
                    None => ssr.flit.kind.is_head(),
                    Some(o) => o == ssr.flit.packet,
                };
                if admissible {
                    let dist = ssr.path.len();
                    match eject_grants.get(&dst) {
                        Some(&(d, _)) if d <= dist => {}
                        _ => {
                            eject_grants.insert(dst, (dist, sid));
                        }
                    }
                } else {
                    ssr.eject = false;
                }
            }
        }

        // Resolution: walk each segment until a grant is lost, reserve the
        // landing buffer (walking back when full), or deliver at dst.
        let due = t + self.params.router_delay + self.params.link_delay - 1;
        let mut moves: Vec<Move> = Vec::new();
        for (sid, ssr) in ssrs.iter().enumerate() {
            let mut granted = 0usize;
            let mut prev = ssr.origin;
            for &hop in &ssr.path {
                if grants.get(&(prev, ssr.dir)) != Some(&(granted, sid)) {
                    break;
                }
                granted += 1;
                prev = hop;
            }
            let full = granted == ssr.path.len();
            let deliver = full
                && ssr.eject
                && eject_grants.get(&ssr.path.last().copied().unwrap_or(ssr.origin))
                    == Some(&(ssr.path.len(), sid));
            if deliver || (ssr.path.is_empty() && ssr.eject) {
                let router = ssr.path.last().copied().unwrap_or(ssr.origin);
                if ssr.flit.kind.is_head() {
                    debug_assert!(self.routers[router].eject_owner.is_none());
                    self.routers[router].eject_owner = Some(ssr.flit.packet);
                }
                moves.push(Move {
                    flit: ssr.flit,
                    from: ssr.origin,
                    from_port: ssr.port,
                    from_index: ssr.from_index,
                    landing: Landing::Deliver { router },
                    hops: granted as u32,
                    due,
                    release_out: None,
                });
                continue;
            }
            // Land in a buffer at the furthest granted router with space.
            let mut land = granted;
            if ssr.eject && granted == ssr.path.len() && !ssr.path.is_empty() {
                // Lost the ejection grant this cycle: hold one hop short
                // rather than park inside the destination router.
                land -= 1;
            }
            let in_dir = opposite(ssr.dir);
            while land > 0 {
                let router = ssr.path[land - 1];
                let q = &self.routers[router];
                if q.fifos[in_dir].len() + q.reserved[in_dir] < self.params.buffer_depth {
                    break;
                }
                land -= 1;
            }
            if land == 0 {
                moves.push(Move {
                    flit: ssr.flit,
                    from: ssr.origin,
                    from_port: ssr.port,
                    from_index: ssr.from_index,
                    landing: Landing::Stay,
                    hops: 0,
                    due,
                    release_out: None,
                });
            } else {
                let router = ssr.path[land - 1];
                self.routers[router].reserved[in_dir] += 1;
                moves.push(Move {
                    flit: ssr.flit,
                    from: ssr.origin,
                    from_port: ssr.port,
                    from_index: ssr.from_index,
                    landing: Landing::Buffer { router, in_dir },
                    hops: land as u32,
                    due,
                    release_out: None,
                });
            }
        }
        self.pending.extend(moves);
    }

    pub fn in_flight_flits(&self) -> u64 {
        self.stats.injected_flits - self.stats.delivered_flits
    }

    pub fn quiescent(&self) -> bool {
        self.in_flight_flits() == 0
    }

    /// Injected flits must all be accounted for: delivered, buffered,
    /// mid-move, or still queued at a source.
    pub fn conservation_ok(&self) -> bool {
        let buffered: u64 = self
            .routers
            .iter()
            .map(|r| r.fifos.iter().map(|f| f.len() as u64).sum::<u64>())
            .sum();
        let queued: u64 = self
            .inj
            .iter()
            .flat_map(|q| q.iter())
            .map(|p| (p.length - p.next_seq) as u64)
            .sum();
        let moving = self.pending.len() as u64;
        let scheduled: u64 = self
            .ideal_due
            .iter()
            .map(|Reverse((_, id))| self.records[*id as usize].length as u64)
            .sum();
        self.stats.delivered_flits + buffered + queued + moving + scheduled
            == self.stats.injected_flits
    }

    /// Step until every injected packet is delivered or `max_cycles` pass.
    pub fn run_to_quiescence(&mut self, max_cycles: u64) -> Result<()> {
        let deadline = self.cycle + max_cycles;
        while !self.quiescent() && self.cycle < deadline {
            self.step()?;
        }
        if self.quiescent() {
            Ok(())
        } else {
            Err(SimError::Deadlock {
                cycle: self.cycle,
                window: max_cycles,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mk(rows: usize, cols: usize, flow: FlowControl) -> NocEngine {
        NocEngine::new(NocParams::new(rows, cols, flow))
    }

    #[test]
    fn wormhole_zero_load_hop_model() {
        // Head latency 2H, packet latency 2H + (L-1).
        for (h, l) in [(1usize, 1u32), (3, 1), (5, 4), (7, 5), (2, 8)] {
            let mut e = mk(1, 8, FlowControl::Wormhole);
            let id = e
                .try_inject(Coord::new(0, 0), Coord::new(h, 0), l)
                .unwrap()
                .unwrap();
            e.run_to_quiescence(10_000).unwrap();
            let rec = &e.records()[id as usize];
            assert_eq!(
                rec.latency().unwrap(),
                2 * h as u64 + (l as u64 - 1),
                "h={h} l={l}"
            );
        }
    }

    #[test]
    fn smart_straight_single_flit_takes_two_cycles() {
        let mut p = NocParams::new(1, 10, FlowControl::Smart);
        p.hpcmax = 14;
        let mut e = NocEngine::new(p);
        let id = e
            .try_inject(Coord::new(0, 0), Coord::new(7, 0), 1)
            .unwrap()
            .unwrap();
        e.run_to_quiescence(100).unwrap();
        assert_eq!(e.records()[id as usize].latency().unwrap(), 2);
    }

    #[test]
    fn smart_turn_costs_one_extra_segment() {
        let mut p = NocParams::new(8, 8, FlowControl::Smart);
        p.hpcmax = 14;
        let mut e = NocEngine::new(p);
        let id = e
            .try_inject(Coord::new(0, 0), Coord::new(3, 2), 1)
            .unwrap()
            .unwrap();
        e.run_to_quiescence(100).unwrap();
        assert_eq!(e.records()[id as usize].latency().unwrap(), 4);
    }

    #[test]
    fn smart_segments_split_at_hpcmax() {
        let mut p = NocParams::new(1, 22, FlowControl::Smart);
        p.hpcmax = 14;
        let mut e = NocEngine::new(p);
        let id = e
            .try_inject(Coord::new(0, 0), Coord::new(21, 0), 1)
            .unwrap()
            .unwrap();
        e.run_to_quiescence(100).unwrap();
        assert_eq!(e.records()[id as usize].latency().unwrap(), 4);
    }

    #[test]
    fn smart_multiflit_serializes_behind_head() {
        let mut p = NocParams::new(1, 10, FlowControl::Smart);
        p.hpcmax = 14;
        let mut e = NocEngine::new(p);
        let id = e
            .try_inject(Coord::new(0, 0), Coord::new(7, 0), 5)
            .unwrap()
            .unwrap();
        e.run_to_quiescence(100).unwrap();
        assert_eq!(e.records()[id as usize].latency().unwrap(), 2 + 4);
    }

    #[test]
    fn ideal_latency_is_packet_length() {
        let mut e = mk(8, 8, FlowControl::Ideal);
        let id = e
            .try_inject(Coord::new(0, 0), Coord::new(7, 7), 5)
            .unwrap()
            .unwrap();
        e.run_to_quiescence(100).unwrap();
        assert_eq!(e.records()[id as usize].latency().unwrap(), 5);
    }

    #[test]
    fn single_packet_is_conserved_and_received() {
        let mut e = mk(4, 4, FlowControl::Wormhole);
        e.try_inject(Coord::new(0, 0), Coord::new(3, 3), 5)
            .unwrap()
            .unwrap();
        for _ in 0..50 {
            e.step().unwrap();
            assert!(e.conservation_ok());
        }
        assert_eq!(e.stats().delivered_packets, 1);
        assert_eq!(e.stats().delivered_flits, 5);
    }

    #[test]
    fn random_traffic_is_conserved_every_cycle() {
        for flow in [FlowControl::Wormhole, FlowControl::Smart, FlowControl::Ideal] {
            let mut p = NocParams::new(4, 4, flow);
            p.hpcmax = 6;
            let mut e = NocEngine::new(p);
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            let mut injected = 0u64;
            for cycle in 0..400 {
                if cycle < 200 && rng.gen_bool(0.4) {
                    let src = Coord::new(rng.gen_range(0..4), rng.gen_range(0..4));
                    let mut dst = src;
                    while dst == src {
                        dst = Coord::new(rng.gen_range(0..4), rng.gen_range(0..4));
                    }
                    let len = rng.gen_range(1..=5);
                    if e.try_inject(src, dst, len).unwrap().is_some() {
                        injected += 1;
                    }
                }
                e.step().unwrap();
                assert!(e.conservation_ok(), "cycle {cycle} flow {flow:?}");
            }
            e.run_to_quiescence(10_000).unwrap();
            assert_eq!(e.stats().delivered_packets, injected);
        }
    }

    #[test]
    fn deliveries_are_in_order_and_contiguous() {
        // flits_delivered tracks seq order; a violation panics inside step.
        for flow in [FlowControl::Wormhole, FlowControl::Smart] {
            let mut p = NocParams::new(5, 5, flow);
            p.hpcmax = 8;
            let mut e = NocEngine::new(p);
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            for _ in 0..120 {
                let src = Coord::new(rng.gen_range(0..5), rng.gen_range(0..5));
                let mut dst = src;
                while dst == src {
                    dst = Coord::new(rng.gen_range(0..5), rng.gen_range(0..5));
                }
                let _ = e.try_inject(src, dst, rng.gen_range(1..=6)).unwrap();
                e.step().unwrap();
            }
            e.run_to_quiescence(20_000).unwrap();
            for r in e.records() {
                if r.delivered_cycle.is_some() {
                    assert_eq!(r.flits_delivered, r.length);
                }
            }
        }
    }

    #[test]
    fn smart_hpc1_matches_wormhole_per_packet() {
        let traffic: Vec<(Coord, Coord, u32)> = {
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            (0..200)
                .map(|_| {
                    let src = Coord::new(rng.gen_range(0..6), rng.gen_range(0..6));
                    let mut dst = src;
                    while dst == src {
                        dst = Coord::new(rng.gen_range(0..6), rng.gen_range(0..6));
                    }
                    (src, dst, rng.gen_range(1..=5))
                })
                .collect()
        };
        let run = |flow: FlowControl, hpc: usize| -> Vec<Option<u64>> {
            let mut p = NocParams::new(6, 6, flow);
            p.hpcmax = hpc;
            let mut e = NocEngine::new(p);
            for (i, (src, dst, len)) in traffic.iter().enumerate() {
                if i % 2 == 0 {
                    e.step().unwrap();
                }
                let _ = e.try_inject(*src, *dst, *len).unwrap();
            }
            e.run_to_quiescence(50_000).unwrap();
            e.records().iter().map(|r| r.latency()).collect()
        };
        let wh = run(FlowControl::Wormhole, 14);
        let sm1 = run(FlowControl::Smart, 1);
        assert_eq!(wh, sm1);
    }

    #[test]
    fn throttling_is_counted_not_fatal() {
        let mut p = NocParams::new(2, 2, FlowControl::Wormhole);
        p.injection_queue_packets = 2;
        let mut e = NocEngine::new(p);
        for _ in 0..5 {
            let _ = e
                .try_inject(Coord::new(0, 0), Coord::new(1, 1), 3)
                .unwrap();
        }
        assert_eq!(e.stats().throttled_injections, 3);
        assert_eq!(e.stats().injected_packets, 2);
        e.run_to_quiescence(1000).unwrap();
    }

    #[test]
    fn loopback_requires_flag() {
        let mut e = mk(2, 2, FlowControl::Wormhole);
        assert!(e
            .try_inject(Coord::new(0, 0), Coord::new(0, 0), 1)
            .is_err());
        let mut p = NocParams::new(2, 2, FlowControl::Wormhole);
        p.allow_loopback = true;
        let mut e = NocEngine::new(p);
        e.try_inject(Coord::new(0, 0), Coord::new(0, 0), 2)
            .unwrap()
            .unwrap();
        e.run_to_quiescence(100).unwrap();
        assert_eq!(e.stats().delivered_packets, 1);
    }

    #[test]
    fn smart_zero_load_no_slower_than_wormhole_all_pairs() {
        for sx in 0..5usize {
            for sy in 0..5usize {
                for dx in 0..5usize {
                    for dy in 0..5usize {
                        if (sx, sy) == (dx, dy) {
                            continue;
                        }
                        let mut wh = mk(5, 5, FlowControl::Wormhole);
                        let mut p = NocParams::new(5, 5, FlowControl::Smart);
                        p.hpcmax = 14;
                        let mut sm = NocEngine::new(p);
                        let s = Coord::new(sx, sy);
                        let d = Coord::new(dx, dy);
                        wh.try_inject(s, d, 3).unwrap().unwrap();
                        sm.try_inject(s, d, 3).unwrap().unwrap();
                        wh.run_to_quiescence(1000).unwrap();
                        sm.run_to_quiescence(1000).unwrap();
                        assert!(
                            sm.records()[0].latency().unwrap()
                                <= wh.records()[0].latency().unwrap()
                        );
                    }
                }
            }
        }
    }
}
