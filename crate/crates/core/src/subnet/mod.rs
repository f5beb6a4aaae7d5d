//! Equal-size subnetting by magic number and the VLSM addressing table.

mod render;

pub use render::{render_plan, RenderFormat};

use std::fmt;

use thiserror::Error;

use crate::addr::{magic_number, usable_hosts, V4Address, V4Prefix};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("infeasible: need {needed} addresses, only {available} available")]
    Infeasible { needed: u64, available: u64 },
    #[error("base {0} has host bits set")]
    InvalidBase(V4Prefix),
    #[error("a /{prefix_len} block cannot start at {next_free}")]
    Alignment {
        next_free: V4Address,
        prefix_len: u8,
    },
    #[error("invalid requirement: {0}")]
    InvalidRequirement(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubnetRequirement {
    pub ref_name: String,
    pub required_hosts: u64,
    /// Mask chosen by the administrator instead of the best fit. It must
    /// still hold `required_hosts`.
    pub fixed_prefix: Option<u8>,
}

impl SubnetRequirement {
    pub fn new(ref_name: impl Into<String>, required_hosts: u64) -> Result<Self, PlanError> {
        let ref_name = ref_name.into();
        if required_hosts == 0 {
            return Err(PlanError::InvalidRequirement(format!(
                "{ref_name}: required hosts must be at least 1"
            )));
        }
        Ok(SubnetRequirement {
            ref_name,
            required_hosts,
            fixed_prefix: None,
        })
    }

    pub fn with_prefix(mut self, prefix_len: u8) -> Result<Self, PlanError> {
        if prefix_len > 30 || usable_hosts(prefix_len) < self.required_hosts {
            return Err(PlanError::InvalidRequirement(format!(
                "{}: /{prefix_len} cannot hold {} hosts",
                self.ref_name, self.required_hosts
            )));
        }
        self.fixed_prefix = Some(prefix_len);
        Ok(self)
    }

    /// The fixed mask if one was given, otherwise the best fit.
    pub fn prefix_len(&self) -> Result<u8, PlanError> {
        match self.fixed_prefix {
            Some(p) => Ok(p),
            None => best_fit_prefix(self.required_hosts),
        }
    }
}

/// Largest prefix length (at most /30) whose usable host count covers
/// `required_hosts`.
pub fn best_fit_prefix(required_hosts: u64) -> Result<u8, PlanError> {
    if required_hosts == 0 {
        return Err(PlanError::InvalidRequirement(
            "required hosts must be at least 1".into(),
        ));
    }
    (0..=30u8)
        .rev()
        .find(|&p| usable_hosts(p) >= required_hosts)
        .ok_or(PlanError::Infeasible {
            needed: required_hosts + 2,
            available: 1 << 32,
        })
}

fn block_of(prefix_len: u8) -> u64 {
    1u64 << (32 - prefix_len.min(32) as u32)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Feasibility {
    /// Awarded hosts plus network and broadcast, summed over subnets.
    pub needed: u64,
    pub available: u64,
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        self.needed <= self.available
    }

    pub fn deficit(&self) -> u64 {
        self.needed.saturating_sub(self.available)
    }
}

/// Sums awarded hosts plus two reserved addresses per subnet and compares
/// against the base block. A requirement too large for any prefix counts
/// as its own size plus two, which is already more than any base holds.
pub fn check_feasibility(reqs: &[SubnetRequirement], base_prefix: u8) -> Feasibility {
    let needed = reqs
        .iter()
        .map(|r| match r.prefix_len() {
            Ok(p) => usable_hosts(p) + 2,
            Err(_) => r.required_hosts + 2,
        })
        .sum();
    Feasibility {
        needed,
        available: block_of(base_prefix),
    }
}

/// One line of the addressing table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanRow {
    pub ref_name: String,
    pub required_hosts: u64,
    pub prefix_len: u8,
    pub awarded_hosts: u64,
    pub network_addr: V4Address,
    pub first_host: V4Address,
    pub last_host: V4Address,
    pub broadcast: V4Address,
}

impl PlanRow {
    pub fn block_size(&self) -> u64 {
        block_of(self.prefix_len)
    }

    pub fn prefix(&self) -> V4Prefix {
        V4Prefix::new(self.network_addr, self.prefix_len).expect("prefix ≤ 30")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanTable {
    base: V4Prefix,
    rows: Vec<PlanRow>,
    // u64 so a plan that fills 255.255.255.255 has somewhere to point
    next_free: u64,
}

impl PlanTable {
    pub fn new(base: V4Prefix) -> Result<Self, PlanError> {
        if base.has_host_bits() {
            return Err(PlanError::InvalidBase(base));
        }
        Ok(PlanTable {
            base,
            rows: Vec::new(),
            next_free: base.network().value() as u64,
        })
    }

    pub fn base(&self) -> V4Prefix {
        self.base
    }

    pub fn rows(&self) -> &[PlanRow] {
        &self.rows
    }

    /// First address after the last allocated block; `None` once the
    /// whole 32-bit space is used.
    pub fn next_free(&self) -> Option<V4Address> {
        u32::try_from(self.next_free).ok().map(V4Address::new)
    }

    /// One past the last address of the base block.
    fn base_end(&self) -> u64 {
        self.base.network().value() as u64 + self.base.mask.block_size()
    }

    /// Allocates the next block for `req` at `next_free`. Fails with
    /// [`PlanError::Alignment`] when `next_free` is not a multiple of the
    /// block size and with [`PlanError::Infeasible`] when the block would
    /// run past the base.
    pub fn append(&mut self, req: &SubnetRequirement) -> Result<&PlanRow, PlanError> {
        let prefix_len = req.prefix_len()?;
        let block = block_of(prefix_len);
        let start = self.next_free;
        if !start.is_multiple_of(block) {
            return Err(PlanError::Alignment {
                next_free: V4Address::new(start as u32),
                prefix_len,
            });
        }
        if start + block > self.base_end() {
            let used = start - self.base.network().value() as u64;
            return Err(PlanError::Infeasible {
                needed: used + block,
                available: self.base.mask.block_size(),
            });
        }
        let awarded = usable_hosts(prefix_len);
        let at = |off: u64| V4Address::new((start + off) as u32);
        self.rows.push(PlanRow {
            ref_name: req.ref_name.clone(),
            required_hosts: req.required_hosts,
            prefix_len,
            awarded_hosts: awarded,
            network_addr: at(0),
            first_host: at(1),
            last_host: at(awarded),
            broadcast: at(awarded + 1),
        });
        self.next_free = start + block;
        Ok(self.rows.last().expect("just pushed"))
    }
}

/// Builds the VLSM table: requirements sorted by host count, largest
/// first (stable, so equal counts keep input order), each block starting
/// right after the previous broadcast.
pub fn build_plan(base: V4Prefix, reqs: &[SubnetRequirement]) -> Result<PlanTable, PlanError> {
    let mut table = PlanTable::new(base)?;
    let feas = check_feasibility(reqs, base.prefix_len());
    if !feas.is_feasible() {
        return Err(PlanError::Infeasible {
            needed: feas.needed,
            available: feas.available,
        });
    }
    let mut sorted = reqs
        .iter()
        .map(|r| Ok((r.prefix_len()?, r)))
        .collect::<Result<Vec<_>, PlanError>>()?;
    // Largest block first keeps every start aligned. Without fixed masks
    // this is the same order as sorting by host count.
    sorted.sort_by_key(|&(p, r)| (p, std::cmp::Reverse(r.required_hosts)));
    for (_, r) in sorted {
        table.append(r)?;
    }
    Ok(table)
}

/// Equal-size subnetting: `count` slices big enough for `hosts_each`,
/// starting at the base and stepping by the magic number of the chosen
/// mask (carried into higher octets for masks shorter than /24).
pub fn magic_plan(
    base: V4Prefix,
    count: usize,
    hosts_each: u64,
) -> Result<Vec<V4Prefix>, PlanError> {
    if base.has_host_bits() {
        return Err(PlanError::InvalidBase(base));
    }
    if count == 0 {
        return Err(PlanError::InvalidRequirement(
            "at least one subnet is required".into(),
        ));
    }
    let p = best_fit_prefix(hosts_each)?;
    let available = base.mask.block_size();
    let needed = count as u64 * block_of(p);
    if p < base.prefix_len() || needed > available {
        return Err(PlanError::Infeasible { needed, available });
    }
    let m = magic_number(p).expect("1 ≤ p ≤ 30");
    let stride = (m.magic as u64) << (8 * (3 - m.octet_index));
    debug_assert_eq!(stride, block_of(p));
    let start = base.network().value() as u64;
    Ok((0..count as u64)
        .map(|i| V4Prefix::new(V4Address::new((start + i * stride) as u32), p).expect("p ≤ 30"))
        .collect())
}

/// Reads `name,required_hosts[,/len]` lines. Blank lines and lines
/// starting with `#` are skipped.
pub fn parse_requirements(text: &str) -> Result<Vec<SubnetRequirement>, PlanError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |why: &str| PlanError::InvalidRequirement(format!("line {}: {why}", i + 1));
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let (name, hosts, mask) = match fields[..] {
            [name, hosts] => (name, hosts, None),
            [name, hosts, mask] => (name, hosts, Some(mask)),
            _ => return Err(bad("expected name,required_hosts[,/len]")),
        };
        if name.is_empty() {
            return Err(bad("empty name"));
        }
        let hosts: u64 = hosts
            .parse()
            .map_err(|_| bad("required_hosts is not a number"))?;
        if hosts == 0 {
            return Err(bad("required_hosts must be at least 1"));
        }
        let mut r = SubnetRequirement::new(name, hosts)?;
        if let Some(mask) = mask {
            let len: u8 = mask
                .strip_prefix('/')
                .and_then(|m| m.parse().ok())
                .ok_or_else(|| bad("mask must look like /27"))?;
            r = r.with_prefix(len).map_err(|e| bad(&e.to_string()))?;
        }
        out.push(r);
    }
    Ok(out)
}

impl fmt::Display for PlanTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_plan(self, RenderFormat::Pretty))
    }
}
