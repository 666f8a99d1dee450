"""Ground-truth world, lidar and planner of the exploration simulator."""
