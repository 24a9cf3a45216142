export {
  FIGURE_KINDS,
  FigureKind,
  FigureSpec,
  FigureStyle,
  extractActivity,
  extractDecay,
  extractFlows,
  extractHeatmap,
  extractInfluence,
  extractMemory,
  extractStructures,
  extractSurrogate,
  extractWeights,
  renderAll,
  renderFigure,
} from './figures.js';
export {
  MissingSectionError,
  SchemaVersionError,
  StudyReport,
  SUPPORTED_SCHEMA_VERSION,
  loadReport,
  validateReport,
} from './report.js';
export { renderToFile, main } from './cli.js';
