# Report output
