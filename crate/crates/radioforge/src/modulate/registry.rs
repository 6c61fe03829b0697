//! The frozen 100-class modulation registry.
//!
//! Class identifiers are stable: 0-39 are single-carrier classes, 40-59
//! OFDM, 60-79 SC-FDMA, 80-99 OTFS, each multicarrier block sharing the
//! same inner-constellation order. Names, ids and default selection
//! weights are part of the dataset contract; reordering would silently
//! relabel every exported annotation, so the composition test below pins
//! the table.

use std::sync::OnceLock;

use super::{
    AnalogKind, CpmFamily, InnerFamily, InnerSpec, LinearFamily, McKind, ModulationSpec,
    ANALOG_MESSAGE_BW_FRACTION, CPM_MOD_INDEX, GFSK_BT, GMSK_BT, MC_CP_LEN, MC_FFT_SIZE,
    MC_USED_SUBCARRIERS, OTFS_CP_LEN, OTFS_DELAY_BINS, OTFS_DOPPLER_BINS, RRC_SPAN_SYMBOLS,
    SINGLE_CARRIER_SPS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassKind {
    Linear { family: LinearFamily, order: u32 },
    Cpm { family: CpmFamily, order: u32 },
    Analog { kind: AnalogKind },
    Multicarrier { kind: McKind, inner: InnerSpec },
    Otfs { inner: InnerSpec },
}

#[derive(Debug, Clone)]
pub struct RegistryEntry {
    pub id: u32,
    pub name: String,
    pub kind: ClassKind,
    /// Experimental classes ship disabled by default in curated subsets
    /// but still carry a default weight for full-registry runs.
    pub experimental: bool,
    pub default_weight: f64,
}

impl RegistryEntry {
    pub fn is_digital(&self) -> bool {
        !matches!(self.kind, ClassKind::Analog { .. })
    }

    /// Metadata type string, e.g. "QAM", "OFDM", "AM-DSB".
    pub fn modulator_type(&self) -> String {
        match self.kind {
            ClassKind::Linear { family, .. } => match family {
                LinearFamily::Ook => "OOK".into(),
                LinearFamily::Ask => "ASK".into(),
                LinearFamily::Psk => "PSK".into(),
                LinearFamily::Qam => "QAM".into(),
                LinearFamily::MilQam => "MIL188-QAM".into(),
            },
            ClassKind::Cpm { family, .. } => match family {
                CpmFamily::Fsk => "FSK".into(),
                CpmFamily::Gfsk => "GFSK".into(),
                CpmFamily::Cpfsk => "CPFSK".into(),
                CpmFamily::Msk => "MSK".into(),
                CpmFamily::Gmsk => "GMSK".into(),
            },
            ClassKind::Analog { kind } => match kind {
                AnalogKind::AmDsb => "AM-DSB".into(),
                AnalogKind::AmSsb => "AM-SSB".into(),
                AnalogKind::AmVsb => "AM-VSB".into(),
                AnalogKind::Fm => "FM".into(),
                AnalogKind::Pm => "PM".into(),
            },
            ClassKind::Multicarrier { kind, .. } => match kind {
                McKind::Ofdm => "OFDM".into(),
                McKind::Scfdma => "SCFDMA".into(),
            },
            ClassKind::Otfs { .. } => "OTFS".into(),
        }
    }

    /// Constellation order (inner order for multicarrier, 1 for analog).
    pub fn order(&self) -> u32 {
        match self.kind {
            ClassKind::Linear { order, .. } | ClassKind::Cpm { order, .. } => order,
            ClassKind::Analog { .. } => 1,
            ClassKind::Multicarrier { inner, .. } | ClassKind::Otfs { inner } => inner.order,
        }
    }

    /// Builds the concrete modulation spec for a drawn symbol rate (always)
    /// and rolloff (linear classes only).
    pub fn spec(&self, symbol_rate_hz: f64, rolloff: f64) -> ModulationSpec {
        match self.kind {
            ClassKind::Linear { family, order } => ModulationSpec::Linear {
                family,
                order,
                symbol_rate_hz,
                rolloff,
                sps: SINGLE_CARRIER_SPS,
                span_symbols: RRC_SPAN_SYMBOLS,
            },
            ClassKind::Cpm { family, order } => ModulationSpec::Cpm {
                family,
                order,
                symbol_rate_hz,
                mod_index: CPM_MOD_INDEX,
                bt: match family {
                    CpmFamily::Gmsk => Some(GMSK_BT),
                    CpmFamily::Gfsk => Some(GFSK_BT),
                    _ => None,
                },
                sps: SINGLE_CARRIER_SPS,
            },
            ClassKind::Analog { kind } => ModulationSpec::Analog {
                kind,
                message_bandwidth_hz: ANALOG_MESSAGE_BW_FRACTION * symbol_rate_hz,
                sample_rate_hz: SINGLE_CARRIER_SPS as f64 * symbol_rate_hz,
            },
            // The drawn symbol rate controls occupied bandwidth uniformly
            // across families: block waveforms scale their subcarrier
            // spacing so they occupy 1.5x the symbol rate, the same span a
            // maximum-rolloff linear class covers.
            ClassKind::Multicarrier { kind, inner } => ModulationSpec::Multicarrier {
                kind,
                inner,
                fft_size: MC_FFT_SIZE,
                used_subcarriers: MC_USED_SUBCARRIERS,
                cp_len: MC_CP_LEN,
                subcarrier_spacing_hz: symbol_rate_hz / MC_USED_SUBCARRIERS as f64,
            },
            ClassKind::Otfs { inner } => ModulationSpec::Otfs {
                inner,
                delay_bins: OTFS_DELAY_BINS,
                doppler_bins: OTFS_DOPPLER_BINS,
                cp_len: OTFS_CP_LEN,
                subcarrier_spacing_hz: 1.5 * symbol_rate_hz / OTFS_DELAY_BINS as f64,
            },
        }
    }
}

/// Inner constellations shared by every multicarrier block, in frozen
/// order.
fn inner_list() -> Vec<(InnerFamily, u32)> {
    let mut v = Vec::new();
    for order in [2u32, 4, 8, 16] {
        v.push((InnerFamily::Ask, order));
    }
    for order in [2u32, 4, 8, 16, 32, 64] {
        v.push((InnerFamily::Psk, order));
    }
    for order in [8u32, 16, 32, 64, 128, 256, 512, 1024, 2048, 4096] {
        v.push((InnerFamily::Qam, order));
    }
    v
}

fn build() -> Vec<RegistryEntry> {
    let mut entries: Vec<RegistryEntry> = Vec::with_capacity(100);
    let mut push = |name: String, kind: ClassKind, experimental: bool, weight: f64| {
        entries.push(RegistryEntry {
            id: entries.len() as u32,
            name,
            kind,
            experimental,
            default_weight: weight,
        });
    };

    push("OOK".into(), ClassKind::Linear { family: LinearFamily::Ook, order: 2 }, false, 3.0);
    for order in [4u32, 8, 16] {
        push(
            format!("{order}ASK"),
            ClassKind::Linear { family: LinearFamily::Ask, order },
            false,
            2.0,
        );
    }
    for order in [2u32, 4, 8, 16, 32, 64] {
        let weight = if order <= 8 { 2.0 } else { 1.2 };
        push(
            format!("{order}PSK"),
            ClassKind::Linear { family: LinearFamily::Psk, order },
            false,
            weight,
        );
    }
    for order in [8u32, 16, 32, 64, 128, 256, 512, 1024, 2048, 4096] {
        let weight = if order <= 256 { 1.2 } else { 0.5 };
        push(
            format!("{order}QAM"),
            ClassKind::Linear { family: LinearFamily::Qam, order },
            false,
            weight,
        );
    }
    for order in [16u32, 32, 64, 128] {
        push(
            format!("MIL188-{order}QAM"),
            ClassKind::Linear { family: LinearFamily::MilQam, order },
            true,
            0.25,
        );
    }
    for (family, tag) in [(CpmFamily::Fsk, "FSK"), (CpmFamily::Gfsk, "GFSK"), (CpmFamily::Cpfsk, "CPFSK")] {
        for order in [2u32, 4, 8] {
            push(format!("{order}{tag}"), ClassKind::Cpm { family, order }, false, 2.0);
        }
    }
    push("MSK".into(), ClassKind::Cpm { family: CpmFamily::Msk, order: 2 }, false, 3.0);
    push("GMSK".into(), ClassKind::Cpm { family: CpmFamily::Gmsk, order: 2 }, false, 3.0);
    for (kind, name) in [
        (AnalogKind::AmDsb, "AM-DSB"),
        (AnalogKind::AmSsb, "AM-SSB"),
        (AnalogKind::AmVsb, "AM-VSB"),
        (AnalogKind::Fm, "FM"),
        (AnalogKind::Pm, "PM"),
    ] {
        push(name.into(), ClassKind::Analog { kind }, false, 2.0);
    }

    for (mc, tag) in [(McKind::Ofdm, "OFDM"), (McKind::Scfdma, "SCFDMA")] {
        for (family, order) in inner_list() {
            let inner = InnerSpec { family, order };
            let weight = if order <= 64 { 0.8 } else { 0.3 };
            push(
                format!("{tag}-{}", inner_name(family, order)),
                ClassKind::Multicarrier { kind: mc, inner },
                false,
                weight,
            );
        }
    }
    for (family, order) in inner_list() {
        let inner = InnerSpec { family, order };
        let weight = if order <= 64 { 0.5 } else { 0.2 };
        push(
            format!("OTFS-{}", inner_name(family, order)),
            ClassKind::Otfs { inner },
            false,
            weight,
        );
    }
    entries
}

fn inner_name(family: InnerFamily, order: u32) -> String {
    match family {
        InnerFamily::Ask => format!("{order}ASK"),
        InnerFamily::Psk => format!("{order}PSK"),
        InnerFamily::Qam => format!("{order}QAM"),
    }
}

/// The full registry in frozen id order.
pub fn all() -> &'static [RegistryEntry] {
    static REGISTRY: OnceLock<Vec<RegistryEntry>> = OnceLock::new();
    REGISTRY.get_or_init(build)
}

pub fn by_name(name: &str) -> Option<&'static RegistryEntry> {
    all().iter().find(|e| e.name == name)
}

pub fn by_id(id: u32) -> Option<&'static RegistryEntry> {
    all().get(id as usize)
}
