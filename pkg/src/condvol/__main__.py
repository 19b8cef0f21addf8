from condvol.cli import main

raise SystemExit(main())
