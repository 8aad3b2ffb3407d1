"""
Scenario configuration, trajectories, closed-loop runners, export and CLI.
"""
