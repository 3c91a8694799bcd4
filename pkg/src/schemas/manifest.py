"""
Run manifest embedded in every output file.
"""
import json
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field


class RunManifest(BaseModel):
    """Subcommand, parsed parameters and seed of one CLI run."""
    subcommand: str = Field(..., min_length=1)
    params: Dict[str, Any] = Field(default_factory=dict)
    endpoints: List[str] = Field(default_factory=list)
    out: Optional[str] = None
    seed: int

    def to_comment(self) -> str:
        """Single `#` line; keys sorted so reruns are byte-identical."""
        body = self.dict(exclude={"out"})
        return "# " + json.dumps(body, sort_keys=True, default=str)

    @classmethod
    def from_comment(cls, line: str) -> "RunManifest":
        if not line.startswith("# "):
            raise ValueError("manifest line must start with '# '")
        return cls(**json.loads(line[2:]))
