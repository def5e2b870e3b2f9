/** Scripted reference session: one 3-point line with a front and a
 * behind point, plus one reference group.  Shared by the fixture
 * generator and the acceptance tests so the committed fixture is
 * exactly what the export path produces.
 */

import { Session } from "./state";

export function buildFixtureSession(): Session {
  const s = new Session("ui_fixture", 64, 48);

  s.setTool("line");
  s.setLayer(1);
  s.click(10.5, 12.25);
  s.click(20, 18);
  s.setLayer(3); // layer id is stamped per vertex at click time
  s.click(30.75, 20);
  s.commitLine();

  s.setTool("front-point");
  s.setLayer(2);
  s.click(5.5, 6.5);
  s.setTool("behind-point");
  s.click(40, 30);

  s.setTool("reference");
  s.setLayer(4);
  s.click(50.25, 33.5);
  s.setTool("behind-point");
  s.setLayer(5);
  s.click(55, 40);
  s.setTool("front-point");
  s.setLayer(1);
  s.click(45.125, 35);

  return s;
}
