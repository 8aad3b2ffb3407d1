"""
Cold-start engine truth model and its four-loop adaptive DSMC controller.
"""
