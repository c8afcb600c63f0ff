# wearalign_core/models/variants.py
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional

from wearalign_core.config.settings import VARIANTS
from wearalign_core.utils.errors import UnknownVariant


@dataclass(frozen=True)
class VariantSpec:
    """Which components a variant builds, and how the domain loss is weighted."""
    name: str
    local_discriminators: bool
    global_discriminator: bool
    attention: bool

    @property
    def adapts(self) -> bool:
        """False for the base model, which never reads the adaptation set."""
        return self.local_discriminators or self.global_discriminator

    def effective_lambda(self, configured: float) -> Optional[float]:
        """λ actually used in the domain loss; absent terms are dropped."""
        if not self.adapts:
            return None
        if not self.local_discriminators:
            return 1.0
        if not self.global_discriminator:
            return 0.0
        return float(configured)


_SPECS: Dict[str, VariantSpec] = {
    "base": VariantSpec("base", local_discriminators=False, global_discriminator=False, attention=False),
    "LD": VariantSpec("LD", local_discriminators=True, global_discriminator=False, attention=False),
    "GD": VariantSpec("GD", local_discriminators=False, global_discriminator=True, attention=False),
    "LDGD": VariantSpec("LDGD", local_discriminators=True, global_discriminator=True, attention=False),
    "full": VariantSpec("full", local_discriminators=True, global_discriminator=True, attention=True),
}
assert tuple(_SPECS) == VARIANTS


def ablation_variant(name: str | VariantSpec) -> VariantSpec:
    if isinstance(name, VariantSpec):
        return name
    try:
        return _SPECS[name]
    except KeyError:
        raise UnknownVariant(f"unknown variant {name!r} (expected one of {', '.join(VARIANTS)})") from None
