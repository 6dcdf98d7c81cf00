"""Voting-bin protocols over additive secret sharing, with a verification harness."""

from .ballots import (BallotSpec, SharedBinGrid, ShiftPair, is_sum_consistent, make_ballot,
                      shift_spec, sum_ballots, tally, unshift_shares, validate_opened_ballot)
from .channels import (REFUSE, BroadcastOutcome, CommitScheme, OrderingMonitor, PartyId,
                       ProtocolAbort, TrafficLedger, Transcript, authority,
                       broadcast_unanimous, commit_reveal_broadcast, simultaneous_broadcast,
                       voter)
from .harness import ExperimentConfig, ExperimentReport, audit_complexity, run_experiment
from .procedures import EqualityVerdict, ads_equality, random_joint
from .protocols import (ElectionParams, ProtocolOutcome, run_protocol, vote_authorities,
                        vote_authorities_robust, vote_basic)
from .sharing import (AdsHandle, Share, is_negative, make_ads, reconstruct, sum_ads,
                      unrank_subset)

__version__ = "0.1.0"
