import { Resvg } from "@resvg/resvg-js";
import * as vega from "vega";
import * as vegaLite from "vega-lite";

export interface RenderRequest {
  /** Correlation token; unique per session. */
  id: string;
  /** Vega-Lite specification document. */
  spec: Record<string, unknown>;
  /** Optional inline rows injected as the spec's data values. */
  data?: unknown[];
  format?: "svg" | "png";
}

export interface RenderResponse {
  id: string;
  ok: boolean;
  /** Base64 payload (SVG text or PNG bytes); present iff ok. */
  image?: string;
  /** True when the scene graph holds no data-driven mark items; defined iff ok. */
  empty?: boolean;
  error?: string;
}

const DEFAULT_SCHEMA = "https://vega.github.io/schema/vega-lite/v5.json";

/**
 * Roles whose subtrees never count toward emptiness: axes, legends and
 * titles are decoration, not data. Structural groups (frame, cell, scope)
 * are recursed into so faceted charts report their cells' marks.
 */
export const DECORATION_ROLE_PREFIXES = ["axis", "legend", "title"];

function isDecoration(role: string, prefixes: string[]): boolean {
  return prefixes.some((p) => role === p || role.startsWith(`${p}-`) || role.startsWith(`${p}_`));
}

/** Count scene-graph items belonging to data-backed (non-group) marks. */
export function countDataMarkItems(
  node: unknown,
  prefixes: string[] = DECORATION_ROLE_PREFIXES,
): number {
  if (!node || typeof node !== "object") {
    return 0;
  }
  const scene = node as { marktype?: unknown; role?: unknown; items?: unknown };
  const role = typeof scene.role === "string" ? scene.role : "";
  if (isDecoration(role, prefixes)) {
    return 0;
  }
  const items = Array.isArray(scene.items) ? scene.items : [];
  if (typeof scene.marktype === "string" && scene.marktype !== "group") {
    let count = 0;
    for (const item of items) {
      if (item && typeof item === "object" && "datum" in (item as object)) {
        count += 1;
      }
    }
    return count;
  }
  let total = 0;
  for (const item of items) {
    total += countDataMarkItems(item, prefixes);
  }
  return total;
}

function svgToPngBase64(svg: string): string {
  const resvg = new Resvg(svg, { fitTo: { mode: "width", value: 800 } });
  return resvg.render().asPng().toString("base64");
}

/** Compile, render headlessly, and report image plus scene-graph emptiness. */
export async function render(request: RenderRequest): Promise<RenderResponse> {
  const { id } = request;
  try {
    const spec: Record<string, unknown> = { ...request.spec };
    if (request.data !== undefined) {
      spec.data = { values: request.data };
    }
    if (!spec.$schema) {
      spec.$schema = DEFAULT_SCHEMA;
    }
    // eslint-disable-next-line @typescript-eslint/no-explicit-any
    const compiled = vegaLite.compile(spec as any);
    const view = new vega.View(vega.parse(compiled.spec), { renderer: "none" });
    await view.runAsync();
    // The runtime scenegraph is { root }; vega's typings call it Scene.
    const sceneRoot = (view.scenegraph() as unknown as { root: unknown }).root;
    const empty = countDataMarkItems(sceneRoot) === 0;
    const svg = await view.toSVG();
    view.finalize();
    const image =
      (request.format ?? "svg") === "png"
        ? svgToPngBase64(svg)
        : Buffer.from(svg, "utf-8").toString("base64");
    return { id, ok: true, image, empty };
  } catch (err) {
    const message = err instanceof Error ? err.message : String(err);
    return { id, ok: false, error: message };
  }
}
