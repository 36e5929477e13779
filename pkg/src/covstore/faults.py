"""Switches for deliberately broken builds, used to show the checkers catch real bugs."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Faults:
    # writer installs a new version even when its local version is stale
    skip_version_check: bool = False
    # EC servers keep fewer than delta + 1 coded elements
    ec_trim_below_delta: bool = False
    # EC clients wait for a plain majority instead of ceil((n + k) / 2)
    ec_majority_quorum: bool = False

    @property
    def any(self) -> bool:
        return self.skip_version_check or self.ec_trim_below_delta or self.ec_majority_quorum


NO_FAULTS = Faults()
