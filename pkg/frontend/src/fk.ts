// Display-only forward kinematics of the robot's planar 3-link chain.
// Mirrors the server's geometry: cumulative joint angles in the sagittal
// (y, z) plane, base at the origin, angle 0 along the +y axis.
export const ROBOT_LINKS = [0.3, 0.25, 0.15] as const;
export const ROBOT_DIMS = 7;

export type Point = [number, number];

export function planarArmPoints(angles: readonly number[]): Point[] {
  if (angles.length < 3) throw new Error(`need at least 3 joint angles, got ${angles.length}`);
  const points: Point[] = [[0, 0]];
  let heading = 0;
  for (let i = 0; i < 3; i++) {
    heading += angles[i]!;
    const [y, z] = points[i]!;
    points.push([y + ROBOT_LINKS[i]! * Math.cos(heading), z + ROBOT_LINKS[i]! * Math.sin(heading)]);
  }
  return points;
}

// Reach of the fully extended chain; used to scale the scene to the canvas.
export const ARM_REACH = ROBOT_LINKS[0] + ROBOT_LINKS[1] + ROBOT_LINKS[2];
