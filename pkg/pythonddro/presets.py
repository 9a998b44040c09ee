"""
Imports and manages the JSON presets shipped with the package
"""

import copy
import json
import os

preset_dir = os.path.join(os.path.dirname(__file__), "presets")

def load_presets(presets_path):
    presets = {}
    for filename in sorted(os.listdir(presets_path)):
        if filename.endswith(".json"):
            preset_name = filename[:-5]
            with open(os.path.join(presets_path, filename)) as preset_file:
                preset_def = json.load(preset_file)
            if not isinstance(preset_def, dict):
                raise TypeError("Imported preset {} is not a JSON object".format(preset_name))
            presets[preset_name] = preset_def
    return presets

'''
Build the alias table so "density_ratio", "DR" and "dr" all name the same ball.
'''
def build_ball_aliases(ball_presets):
    aliases = {}
    for ball_id, ball_def in ball_presets.items():
        for alias in ball_def.get("aliases", []) + [ball_id]:
            key = alias.lower()
            if key in aliases and aliases[key] != ball_id:
                raise ValueError("Alias {} is claimed by balls {} and {}".format(alias, aliases[key], ball_id))
            aliases[key] = ball_id
    return aliases

def run_defaults(command):
    """ Defaults for a CLI command: the common block overlaid with the command's own """
    if command not in supported_presets["run"]:
        raise ValueError("'{}' is not a known command. Valid commands include: ({})".format(
            command, ", ".join(k for k in supported_presets["run"] if k != "common")))
    defaults = copy.deepcopy(supported_presets["run"]["common"])
    defaults.update(copy.deepcopy(supported_presets["run"][command]))
    return defaults

supported_presets = load_presets(preset_dir)

solver_defaults = supported_presets["solver"]
ball_descriptions = supported_presets["balls"]
ball_aliases = build_ball_aliases(ball_descriptions)
