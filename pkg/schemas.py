from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from config import DEFAULT_SEED, DEFAULT_SHOTS


# === Input Validation Constants ===
MAX_N_MAX = 11
MAX_SITES = 16
MAX_STEPS = 200
MAX_SHOTS = 10_000_000
MAX_GRID_POINTS = 10_000
SCHEMA_VERSION = 1

# Pauli error table: per level pair for one qutrit, per gate for two qutrits
TABLE_ONE_QUDIT = {"01": 0.00038, "02": 0.00143, "12": 0.00068}
TABLE_TWO_QUDIT = 0.003
# Per-gate two-qutrit error budget of the default emulation mode, spread over all 81
# sigma (x) sigma products; with it the C_sum-native signal is lost after 3 to 6
# Trotter steps and the L^z L^z-native signal after 7 to 10 (n_s=4, dt=0.39)
EMULATION_TWO_QUDIT_TOTAL = 0.15

APPENDIX_STEP_SIZES = (0.235, 0.31, 0.39)


# === Model Schemas ===

class ModelParams(BaseModel):
    """Truncated scalar-QED chain; U is identified with g^2 a_s^2."""
    model_config = ConfigDict(frozen=True)

    n_max: int = Field(1, ge=1, le=MAX_N_MAX)
    n_s: int = Field(4, ge=1, le=MAX_SITES)
    U: float = 5.0
    X: float = 2.0
    Y: float = 0.5
    c_bound: int = Field(0, ge=0, le=1)
    boundary: Literal["open"] = "open"

    @property
    def local_dim(self) -> int:
        return 2 * self.n_max + 1

    @property
    def total_dim(self) -> int:
        return self.local_dim ** self.n_s


# === Noise Schemas ===

class TwoQuditNoise(BaseModel):
    model_config = ConfigDict(frozen=True)

    mode: Literal["total", "per_term"] = "total"
    p: float = Field(TABLE_TWO_QUDIT, ge=0, le=1)


class PauliChannelSpec(BaseModel):
    """
    Qutrit Pauli error rates.

    one_qudit maps a level pair ("01", "02", "12") to a probability, read per
    axis (each of sigma^x, sigma^y, sigma^z gets it) or, with
    one_qudit_mode="per_pair", as the total for the pair split over the axes.
    """
    model_config = ConfigDict(frozen=True)

    one_qudit: Dict[str, float] = Field(default_factory=lambda: dict(TABLE_ONE_QUDIT))
    one_qudit_mode: Literal["per_axis", "per_pair"] = "per_axis"
    two_qudit: TwoQuditNoise = Field(default_factory=TwoQuditNoise)
    d: int = Field(3, ge=2)

    @field_validator("one_qudit")
    @classmethod
    def check_pairs(cls, value: Dict[str, float]) -> Dict[str, float]:
        for key, p in value.items():
            if len(key) != 2 or not key.isdigit() or int(key[0]) >= int(key[1]):
                raise ValueError(f"level pair key '{key}' must look like '01'")
            if p < 0:
                raise ValueError(f"probability for pair {key} is negative")
        return value

    @model_validator(mode="after")
    def check_levels(self):
        for key in self.one_qudit:
            if int(key[1]) >= self.d:
                raise ValueError(f"level pair {key} outside d={self.d}")
        return self

    @classmethod
    def zero(cls, d: int = 3) -> "PauliChannelSpec":
        return cls(one_qudit={}, two_qudit=TwoQuditNoise(p=0.0), d=d)

    def scaled(self, factor: float) -> "PauliChannelSpec":
        return PauliChannelSpec(
            one_qudit={k: v * factor for k, v in self.one_qudit.items()},
            one_qudit_mode=self.one_qudit_mode,
            two_qudit=TwoQuditNoise(mode=self.two_qudit.mode, p=self.two_qudit.p * factor),
            d=self.d,
        )


# === Experiment Schemas ===

class SpectralConfig(BaseModel):
    e_min: float = -10.0
    e_max: float = 10.0
    n_e: int = Field(201, ge=1, le=MAX_GRID_POINTS)
    p: float = 0.0
    t_max: Optional[float] = Field(None, gt=0)


class ExperimentConfig(BaseModel):
    """Everything needed to reproduce one experiment run byte-for-byte."""
    schema_version: Literal[1] = SCHEMA_VERSION
    params: ModelParams = Field(default_factory=ModelParams)
    dt: float = Field(0.39, gt=0)
    steps: int = Field(10, ge=0, le=MAX_STEPS)
    natives: List[Literal["csum", "lzlz", "qubit"]] = Field(default_factory=lambda: ["csum", "lzlz"])
    noise: PauliChannelSpec = Field(default_factory=PauliChannelSpec)
    noise_mode: Literal["total", "table-total", "per-term", "off"] = "total"
    two_qudit_total: float = Field(EMULATION_TWO_QUDIT_TOTAL, ge=0, lt=1)
    shots: int = Field(DEFAULT_SHOTS, ge=1, le=MAX_SHOTS)
    seed: int = Field(DEFAULT_SEED, ge=0, lt=2 ** 64)
    source_site: int = Field(0, ge=0)
    initial: Literal["gamma", "omega"] = "gamma"
    signal_threshold: float = Field(0.1, gt=0, lt=1)
    signal_window: int = Field(3, ge=1)
    scan_n_s: List[int] = Field(default_factory=lambda: list(range(2, 10)))
    scan_couplings: List[float] = Field(default_factory=lambda: [float(g) for g in range(2, 11)])
    spectral: Optional[SpectralConfig] = None
    out: Optional[str] = None

    @model_validator(mode="after")
    def check_sites(self):
        if self.source_site >= self.params.n_s:
            raise ValueError(f"source_site {self.source_site} outside chain of {self.params.n_s} sites")
        return self

    def effective_noise(self) -> PauliChannelSpec:
        """
        Noise spec after applying noise_mode.

        total: two_qudit_total spread over the products. table-total: the
        table value spread over the products. per-term: the table value on
        every product.
        """
        if self.noise_mode == "off":
            return PauliChannelSpec.zero(self.noise.d)
        if self.noise_mode == "total":
            two = TwoQuditNoise(mode="total", p=self.two_qudit_total)
        elif self.noise_mode == "table-total":
            two = TwoQuditNoise(mode="total", p=self.noise.two_qudit.p)
        else:
            two = TwoQuditNoise(mode="per_term", p=self.noise.two_qudit.p)
        return self.noise.model_copy(update={"two_qudit": two})


class OverlapScanRequest(BaseModel):
    params: ModelParams = Field(default_factory=ModelParams)
    n_s: List[int] = Field(default_factory=lambda: [2, 3, 4], max_length=16)
    couplings: List[float] = Field(default_factory=lambda: [5.0], max_length=64)


# === Response Schemas ===

class GateCountRow(BaseModel):
    gate: str
    qubit_1q: int
    qubit_2q: int
    qutrit_1q: int
    qutrit_2q: int


class VerificationRow(BaseModel):
    name: str
    max_residual: float
    tolerance: float
    passed: bool


class OverlapRow(BaseModel):
    n_s: int
    coupling: float
    overlap_gamma: float
    overlap_111: float
    degenerate: bool = False


class CorrelatorRow(BaseModel):
    n_t: int
    t: float
    native: str
    provenance: Literal["exact", "circuit_noiseless", "circuit_noisy"]
    re: float
    im: float
    stat_err_re: float = 0.0
    stat_err_im: float = 0.0


class SpectralRow(BaseModel):
    energy: float
    p: float
    re: float
    im: float


class SignalLossEntry(BaseModel):
    native: str
    loss_step: Optional[int]
    threshold: float
    window: int


class RunSummary(BaseModel):
    model_config = ConfigDict(from_attributes=True)

    id: int
    kind: str
    config_hash: str
    seed: Optional[str]
    software_version: str


class RunResponse(BaseModel):
    success: bool = True
    run_id: Optional[int] = None
    rows: List[dict] = []
    extra: dict = {}
