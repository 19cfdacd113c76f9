"""Exception types shared across the package."""


class DroidError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(DroidError, ValueError):
    """A precondition on an argument or configuration was violated."""


class ParseError(DroidError):
    """A problem or timing file could not be parsed.

    Carries the offending path and line number so callers can point the
    user at the exact location.
    """

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        loc = ""
        if path is not None:
            loc = f"{path}:"
            if line is not None:
                loc += f"{line}:"
            loc += " "
        super().__init__(loc + message)


class KernelError(DroidError):
    """Base class for errors detected inside the event kernel."""


class DeadlockError(KernelError):
    """The event queue drained while parked events were still waiting.

    ``stuck_nets`` lists the trigger nets the parked events were keyed on.
    """

    def __init__(self, stuck_nets):
        self.stuck_nets = list(stuck_nets)
        super().__init__(f"event queue empty with pending triggers on nets {self.stuck_nets}")


class WeakCouplingError(KernelError):
    """Two unconsumed events landed on one net.

    The one-event-per-net map only works while coupling shifts stay small
    compared to the oscillation period; a collision means that assumption
    broke down.
    """


class CausalityError(KernelError):
    """A generated event would not arrive strictly after its cause."""
