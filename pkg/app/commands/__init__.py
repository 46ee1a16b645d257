"""CLI subcommands, one module each."""

from app.commands import calibrate, evaluate, patch, reconstruct, synth

COMMANDS = (synth, reconstruct, patch, evaluate, calibrate)
