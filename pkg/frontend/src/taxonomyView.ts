/**
 * Taxonomy tree model. Node labels are taken verbatim from the served
 * document; the browser never rewrites, reorders, or augments them.
 */
import type { TaxonomyPayload } from "./types.js";

export interface TreeNode {
  label: string;
  kind: "category" | "subcategory" | "concept" | "context";
  /** Pair key prefix pieces accumulated down the tree. */
  children: TreeNode[];
}

export function taxonomyTree(payload: TaxonomyPayload): TreeNode[] {
  return payload.document.categories.map((category) => ({
    label: category.name,
    kind: "category",
    children: category.subcategories.map((subcategory) => ({
      label: subcategory.name,
      kind: "subcategory",
      children: subcategory.concepts.map((concept) => ({
        label: concept,
        kind: "concept",
        children: subcategory.contexts.map((context) => ({
          label: context.name,
          kind: "context",
          children: [],
        })),
      })),
    })),
  }));
}

export function pairKey(category: string, subcategory: string, concept: string, context: string): string {
  return [category, subcategory, concept, context].join("|");
}

/** Flatten to selectable (pair key, labels) leaves. */
export function allPairKeys(payload: TaxonomyPayload): string[] {
  const keys: string[] = [];
  for (const category of payload.document.categories) {
    for (const subcategory of category.subcategories) {
      for (const concept of subcategory.concepts) {
        for (const context of subcategory.contexts) {
          keys.push(pairKey(category.name, subcategory.name, concept, context.name));
        }
      }
    }
  }
  return keys;
}

function filterTree(nodes: TreeNode[], needle: string): TreeNode[] {
  const matched: TreeNode[] = [];
  for (const node of nodes) {
    const children = filterTree(node.children, needle);
    if (node.label.toLowerCase().includes(needle) || children.length > 0) {
      matched.push({ ...node, children });
    }
  }
  return matched;
}

/** Case-insensitive substring filter; an unmatched query yields an empty tree. */
export function searchTree(nodes: TreeNode[], query: string): TreeNode[] {
  const needle = query.trim().toLowerCase();
  if (needle === "") return nodes;
  return filterTree(nodes, needle);
}
