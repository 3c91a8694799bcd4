"""
In-memory transcript of every frame the master sends or receives.
"""
import csv
import logging
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple

from src.netproto.frames import MsgType

logger = logging.getLogger(__name__)

SEND = "send"
RECV = "recv"


@dataclass(frozen=True)
class TranscriptEntry:
    seq: int
    time: float
    direction: str
    worker: int
    msg_type: MsgType
    round: Optional[int] = None
    slot: Optional[int] = None
    size: int = 0
    payload: bytes = field(default=b"", repr=False)


class Transcript:
    """
    Bounded ring of frame records.
    Uses a deque with a max size so long runs cannot exhaust memory.
    """

    def __init__(self, max_entries: int = 100_000, keep_payloads: bool = True):
        """
        Initialize the transcript.

        Args:
            max_entries: Maximum number of frames to keep (oldest dropped first)
            keep_payloads: Store raw payload bytes for content audits
        """
        self.entries = deque(maxlen=max_entries)
        self.keep_payloads = keep_payloads
        self.dropped = 0
        self._seq = 0

    def record(
        self,
        time: float,
        direction: str,
        worker: int,
        msg_type: MsgType,
        payload: bytes = b"",
        round_: Optional[int] = None,
        slot: Optional[int] = None,
    ) -> TranscriptEntry:
        if len(self.entries) == self.entries.maxlen:
            self.dropped += 1
        entry = TranscriptEntry(
            seq=self._seq,
            time=time,
            direction=direction,
            worker=worker,
            msg_type=msg_type,
            round=round_,
            slot=slot,
            size=len(payload),
            payload=payload if self.keep_payloads else b"",
        )
        self._seq += 1
        self.entries.append(entry)
        return entry

    def get_entries(
        self,
        worker: Optional[int] = None,
        msg_type: Optional[MsgType] = None,
        direction: Optional[str] = None,
        limit: Optional[int] = None,
    ) -> List[TranscriptEntry]:
        """
        Get filtered entries in recording order.

        Args:
            worker: Filter by worker index
            msg_type: Filter by message type
            direction: Filter by "send" or "recv"
            limit: Keep only the most recent entries

        Returns:
            List of transcript entries
        """
        entries = list(self.entries)
        if worker is not None:
            entries = [e for e in entries if e.worker == worker]
        if msg_type is not None:
            entries = [e for e in entries if e.msg_type == msg_type]
        if direction is not None:
            entries = [e for e in entries if e.direction == direction]
        if limit is not None:
            entries = entries[-limit:]
        return entries

    def causality_violations(self) -> List[Tuple[int, int, str]]:
        """(worker, round, reason) where PACKET -> ACK_RECEIPT -> RESULT fails.

        Order is checked on recording sequence; a RESULT without an
        ACK_RECEIPT, or either without a PACKET, is a violation.
        """
        steps: Dict[Tuple[int, int], Dict[MsgType, int]] = {}
        for e in self.entries:
            if e.msg_type in (MsgType.PACKET, MsgType.ACK_RECEIPT, MsgType.RESULT) and e.round is not None:
                steps.setdefault((e.worker, e.round), {}).setdefault(e.msg_type, e.seq)
        violations = []
        for (worker, round_), seen in sorted(steps.items()):
            sent = seen.get(MsgType.PACKET)
            ack = seen.get(MsgType.ACK_RECEIPT)
            result = seen.get(MsgType.RESULT)
            if sent is None:
                if not self.dropped:
                    violations.append((worker, round_, "reply without PACKET"))
                continue
            if ack is not None and ack < sent:
                violations.append((worker, round_, "ACK_RECEIPT before PACKET"))
            if result is not None:
                if ack is None:
                    violations.append((worker, round_, "RESULT without ACK_RECEIPT"))
                elif result < ack:
                    violations.append((worker, round_, "RESULT before ACK_RECEIPT"))
        return violations

    def stop_violations(self, workers: Iterable[int]) -> List[str]:
        """Every worker got STOP, and no PACKET left after the first STOP."""
        stops = self.get_entries(msg_type=MsgType.STOP, direction=SEND)
        problems = []
        if not stops:
            return ["no STOP broadcast"]
        first_stop = min(e.seq for e in stops)
        stopped_workers = {e.worker for e in stops}
        for worker in workers:
            if worker not in stopped_workers:
                problems.append(f"worker {worker} never received STOP")
        late = [e for e in self.get_entries(msg_type=MsgType.PACKET, direction=SEND) if e.seq > first_stop]
        if late:
            problems.append(f"{len(late)} PACKET frames sent after STOP")
        return problems

    def frames_with_payload(self, payload: bytes, workers: Optional[Iterable[int]] = None) -> List[TranscriptEntry]:
        """Sent frames whose payload equals `payload` exactly."""
        chosen = None if workers is None else set(workers)
        return [
            e for e in self.entries
            if e.direction == SEND and e.payload == payload and (chosen is None or e.worker in chosen)
        ]

    def to_csv(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["seq", "time_s", "direction", "worker", "type", "round", "slot", "bytes"])
            for e in self.entries:
                writer.writerow([
                    e.seq, repr(e.time), e.direction, e.worker, e.msg_type.name,
                    "" if e.round is None else e.round,
                    "" if e.slot is None else e.slot,
                    e.size,
                ])
