"""Cycle-level simulator and command-mapping compiler for an in-bank DRAM
number-theoretic-transform accelerator."""

from .device import BankGeometry, BankState, PimCommand, execute, run_commands
from .harness import (ConfigError, RunConfig, VerificationFailed, run_job,
                      sweep, verify_campaign)
from .mapper import (BufferAllocation, JobTooLarge, MapInfo, NttJob,
                     PlanMismatch, RegimePlan, TableFallback, assign_twiddles,
                     baseline_single_buffer, classify_stages, map_ntt)
from .modmath import (Modulus, NoSuchRoot, TwiddleGen, butterfly,
                      find_root_of_unity, from_mont, is_ntt_friendly, mod_add,
                      mod_sub, mont_mul, to_mont, twiddle_sequence)
from .reference import (BadRoot, NotNttFriendly, NttPlan, PlanValidationFailed,
                        SizeMismatch, bit_reverse_permute, build_plan, intt,
                        ntt, ntt_direct, ntt_iterative, plan_for,
                        polymul_negacyclic, polymul_schoolbook)
from .timing import (EnergyTable, SimStats, TimedTrace, TimingParams, account,
                     check_legality, schedule)

__version__ = "0.1.0"
