import { App } from './app.js';

// Entry point for the served page. Dataset and schema paths come from the
// query string so the same bundle works against any data root, e.g.
//   /?data=airline.csv&schema=airline.schema.json
const root = document.getElementById('app');
const params = new URLSearchParams(window.location.search);
const data = params.get('data');
const schema = params.get('schema');

if (root instanceof HTMLElement) {
  if (data && schema) {
    void new App(root).open(data, schema);
  } else {
    const banner = root.querySelector('#banner');
    if (banner) {
      banner.textContent =
        'pass ?data=<csv>&schema=<schema.json> in the URL to open a session';
    }
  }
}
