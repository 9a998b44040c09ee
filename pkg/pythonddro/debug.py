"""
Debug printer

Handles logging at different debug levels
"""

import sys

from colorama import Fore, Style, init
init()

BALL_TEMPLATE = """
{HEADER_COLOR}[{id}] {name}{END_COLOR}
 * Aliases: {VALUE_COLOR}{aliases}{END_COLOR}
 * Membership: {VALUE_COLOR}{membership}{END_COLOR}
 * Equivalent problem: {VALUE_COLOR}{equivalent}{END_COLOR}
 * Notes: {VALUE_COLOR}{notes}{END_COLOR}
"""

REPORT_TEMPLATE = """
{HEADER_COLOR}[{kind}] radius {radius}{END_COLOR}
 * Converged? {VALUE_COLOR}{converged}{END_COLOR}
 * Iterations: {VALUE_COLOR}{iterations}{END_COLOR}
 * Objective: {VALUE_COLOR}{objective:.10g}{END_COLOR}
 * Smooth conditions: {VALUE_COLOR}{smooth_conditions}{END_COLOR}
"""

class DebugMaster(object):
    """ Auto-instantiated as Debug to provide a single point of contact """
    def __init__(self, stream=None):
        self.level = 2
        self.stream = stream
        self.color = True

    def tag(self, name):
        colors = {
            "ERROR": Fore.RED + Style.BRIGHT,
            "WARNING": Fore.YELLOW + Style.BRIGHT,
            "MESSAGE": Fore.CYAN + Style.BRIGHT,
            "TRACE": Fore.WHITE,
        }
        label = "[{:^7}] ".format(name)
        if not self.color:
            return label
        return "{}{}{}".format(colors[name], label.rstrip(), Style.RESET_ALL) + " "

    def write(self, text):
        stream = self.stream if self.stream is not None else sys.stderr
        stream.write(text + "\n")

    def log(self, message, level=1):
        """ Creates a custom message at the specified level """
        if level <= self.level:
            self.write(message)

    def log_error(self, message):
        """ Creates an error-level log messsage """
        self.log(self.tag("ERROR") + message, 1)

    def log_warning(self, message):
        """ Creates a warning-level log messsage """
        self.log(self.tag("WARNING") + message, 2)

    def log_message(self, message):
        """ Creates a message-level log messsage """
        self.log(self.tag("MESSAGE") + message, 3)

    def log_trace(self, message):
        """ Per-iteration output, only shown at level 4 """
        self.log(self.tag("TRACE") + message, 4)

    def colors(self, header):
        if not self.color:
            return {"HEADER_COLOR": "", "VALUE_COLOR": "", "END_COLOR": ""}
        return {
            "HEADER_COLOR": header + Style.BRIGHT,
            "VALUE_COLOR": Fore.YELLOW + Style.BRIGHT,
            "END_COLOR": Fore.RESET + Style.RESET_ALL,
        }

    def explain(self, structure):
        if self.level <= 1:
            return # Only explain if debugging level is 2+
        # Decide which type of structure this is
        if isinstance(structure, list):
            for entry in structure:
                self.explain(entry)
        elif isinstance(structure, dict) and "membership" in structure:
            self.explain_ball(structure)
        elif hasattr(structure, "dual_star") and hasattr(structure, "x_star"):
            self.explain_report(structure)
        else:
            raise TypeError("Expected a ball description, a solve report, or a list of them.")

    def explain_ball(self, ball):
        self.write(BALL_TEMPLATE.format(
            aliases=", ".join(ball.get("aliases", [])),
            **self.colors(Fore.CYAN),
            **{k: v for k, v in ball.items() if k != "aliases"}))

    def explain_report(self, report):
        self.write(REPORT_TEMPLATE.format(
            kind=report.kind,
            radius=report.radius,
            converged=report.converged,
            iterations=report.iterations,
            objective=report.objective,
            smooth_conditions=report.smooth_conditions,
            **self.colors(Fore.GREEN)))

Debug = DebugMaster()

''' Utility class to save/set/restore Debug level. '''
class DebugLevel:
    def __init__(self, new_level):
        self.old_level = Debug.level
        Debug.level = new_level

    def restore(self):
        Debug.level = self.old_level
