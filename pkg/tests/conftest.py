"""Test-session wiring: register the custom fixtures' instruction set."""

from helpers import typed_instruction_set
from tpg.instructions import register_instruction_set

register_instruction_set("typed-test", typed_instruction_set)
