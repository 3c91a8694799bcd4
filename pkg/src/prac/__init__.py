"""
PRAC protocol: master state machine, drivers, vector hiding and audits.
"""
from .packets import BetaEstimator, Packet, PacketKind, ResultMsg, worker_compute
from .master import (
    MasterState,
    create_master_state,
    dispatch_time,
    next_packet,
    on_result,
    record_send,
    split_blocks,
    try_finish,
)
from .local import run_in_process, run_local
from .hiding import hide_x_run

__all__ = [
    # Messages
    "BetaEstimator",
    "Packet",
    "PacketKind",
    "ResultMsg",
    "worker_compute",
    # Master
    "MasterState",
    "create_master_state",
    "dispatch_time",
    "next_packet",
    "on_result",
    "record_send",
    "split_blocks",
    "try_finish",
    # Drivers
    "run_in_process",
    "run_local",
    "hide_x_run",
]
