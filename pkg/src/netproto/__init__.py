"""
Networked master/worker runtime over length-prefixed TCP frames.
"""
from .frames import Frame, MsgType, PacketWire
from .transcript import Transcript, TranscriptEntry
from .worker import WorkerServer, WorkerSession, run_worker
from .master import NetMaster, NetRunResult, run_master, run_master_hidden

__all__ = [
    "Frame",
    "MsgType",
    "PacketWire",
    "Transcript",
    "TranscriptEntry",
    "WorkerServer",
    "WorkerSession",
    "run_worker",
    "NetMaster",
    "NetRunResult",
    "run_master",
    "run_master_hidden",
]
